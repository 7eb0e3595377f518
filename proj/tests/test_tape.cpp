#include "gdr/tape.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "gdr/rng.hpp"
#include "test_util.hpp"

using namespace gdr;
using namespace gdr::tape;
using testutil::finite_diff;
using testutil::kink_free_tensor;
using testutil::rel_err;

TEST(Tape, ConvCenterValueAndZeroKernel) {
    const Var x = constant(Tensor::full({1, 1, 3, 3}, 1.0f));
    const Var w = constant(Tensor::full({1, 1, 3, 3}, 1.0f));
    const Var b = constant(Tensor({1, 1, 1, 1}));
    const Var out = conv2d(x, w, b, 1, 1);
    EXPECT_FLOAT_EQ(out->value.at(0, 0, 1, 1), 9.0f);

    const Var wz = constant(Tensor({1, 1, 3, 3}));
    const Var out2 = conv2d(x, wz, b, 1, 1);
    for (float v : out2->value.data) EXPECT_FLOAT_EQ(v, 0.0f);
}

TEST(Tape, ConvShapeErrors) {
    const Var x = constant(Tensor({1, 3, 8, 8}));
    const Var w = constant(Tensor({4, 2, 3, 3}));  // wrong input channels
    EXPECT_THROW(conv2d(x, w, nullptr, 1, 1), ShapeError);
    const Var w2 = constant(Tensor({4, 3, 11, 11}));  // output would be empty
    EXPECT_THROW(conv2d(x, w2, nullptr, 1, 0), ShapeError);
}

TEST(Tape, ConvInputGradMatchesFiniteDifferences) {
    Rng rng(3);
    const Tensor x0 = kink_free_tensor({1, 2, 5, 5}, rng);
    const Tensor w0 = kink_free_tensor({3, 2, 3, 3}, rng);
    const Tensor b0 = kink_free_tensor({1, 3, 1, 1}, rng);

    const Var x = leaf(x0, true);
    const Var w = leaf(w0, true);
    const Var b = leaf(b0, true);
    const Var loss = sum_all(conv2d(x, w, b, 1, 1));
    backward(loss);

    const auto loss_at = [&](const Tensor& xv) {
        return sum_all(conv2d(constant(xv), constant(w0), constant(b0), 1, 1))->scalar();
    };
    EXPECT_LT(rel_err(x->grad(), finite_diff(loss_at, x0)), 1e-3);

    const auto loss_at_w = [&](const Tensor& wv) {
        return sum_all(conv2d(constant(x0), constant(wv), constant(b0), 1, 1))->scalar();
    };
    EXPECT_LT(rel_err(w->grad(), finite_diff(loss_at_w, w0)), 1e-3);
}

TEST(Tape, Activations) {
    const Var x = constant(Tensor::from({1, 1, 1, 3}, {-1.0f, 0.0f, 2.0f}));
    EXPECT_FLOAT_EQ(relu(x)->value.data[0], 0.0f);
    EXPECT_FLOAT_EQ(relu(x)->value.data[2], 2.0f);
    EXPECT_FLOAT_EQ(sigmoid(constant(Tensor::scalar(0.0f)))->value.item(), 0.5f);
    EXPECT_FLOAT_EQ(leaky_relu(constant(Tensor::scalar(-2.0f)), 0.2f)->value.item(),
                    -0.4f);
    EXPECT_NEAR(tape::tanh(constant(Tensor::scalar(0.5f)))->value.item(),
                std::tanh(0.5f), 1e-6);
}

TEST(Tape, MseValues) {
    const Var a = constant(Tensor::full({1, 2, 3, 4}, 0.7f));
    EXPECT_FLOAT_EQ(mse(a, a)->value.item(), 0.0f);

    const Var ones = constant(Tensor::full({1, 1, 2, 2}, 1.0f));
    const Var zeros = constant(Tensor({1, 1, 2, 2}));
    EXPECT_FLOAT_EQ(mse(ones, zeros)->value.item(), 1.0f);

    const Var v1 = constant(Tensor::from({1, 1, 1, 2}, {1.0f, 2.0f}));
    const Var v2 = constant(Tensor({1, 1, 1, 2}));
    EXPECT_FLOAT_EQ(mse(v1, v2)->value.item(), 2.5f);

    EXPECT_THROW(mse(ones, a), ShapeError);
}

TEST(Tape, LogLossTerms) {
    const Var half = constant(Tensor::full({4, 1, 1, 1}, 0.5f));
    EXPECT_NEAR(log_one_minus_mean(half)->value.item(), std::log(0.5), 1e-6);

    const Var near_one = constant(Tensor::full({2, 1, 1, 1}, 0.999999f));
    EXPECT_NEAR(log_mean(near_one)->value.item(), 0.0, 1e-5);

    // Clamp floor: log d at d=0 evaluates at the 1e-6 clamp.
    const Var zero = constant(Tensor({3, 1, 1, 1}));
    EXPECT_NEAR(log_mean(zero)->value.item(), std::log(1e-6), 1e-4);

    Tensor bad({1, 1, 1, 1});
    bad.data[0] = std::nanf("");
    EXPECT_THROW(log_mean(constant(bad)), ValueError);
}

TEST(Tape, ConcatBatch) {
    Rng rng(5);
    const Tensor a0 = rng.normal_tensor({2, 3, 8, 8});
    const Tensor b0 = rng.normal_tensor({1, 3, 8, 8});
    const Var a = leaf(a0, true);
    const Var b = leaf(b0, true);
    const Var cat = concat_batch(a, b);
    EXPECT_EQ(cat->value.shape, (Shape4{3, 3, 8, 8}));

    backward(sum_all(cat));
    for (float v : a->grad().data) EXPECT_FLOAT_EQ(v, 1.0f);
    for (float v : b->grad().data) EXPECT_FLOAT_EQ(v, 1.0f);

    const Var c = constant(Tensor({1, 2, 8, 8}));
    EXPECT_THROW(concat_batch(a, c), ShapeError);
}

TEST(Tape, BackwardBasics) {
    Rng rng(11);
    const Tensor x0 = rng.normal_tensor({1, 2, 3, 3});
    const Var x = leaf(x0, true);
    backward(sum_all(x));
    for (float v : x->grad().data) EXPECT_FLOAT_EQ(v, 1.0f);

    const Var w = leaf(Tensor::from({1, 1, 1, 1}, {2.0f}), true);
    backward(mse(w, constant(Tensor({1, 1, 1, 1}))));
    EXPECT_FLOAT_EQ(w->grad().item(), 4.0f);  // d/dw w^2 at w=2

    EXPECT_THROW(backward(x), ShapeError);  // non-scalar root
}

TEST(Tape, UntouchedLeafGetsZeroGrad) {
    const Var x = leaf(Tensor::full({1, 1, 2, 2}, 1.0f), true);
    const Var unused = leaf(Tensor::full({1, 1, 2, 2}, 1.0f), true);
    backward(sum_all(x));
    for (float v : unused->grad().data) EXPECT_FLOAT_EQ(v, 0.0f);
}

TEST(Tape, SharedSubexpressionAccumulates) {
    const Var x = leaf(Tensor::scalar(3.0f), true);
    const Var y = add(x, x);  // dy/dx = 2
    backward(sum_all(y));
    EXPECT_FLOAT_EQ(x->grad().item(), 2.0f);

    x->zero_grad();
    const Var z = mul(x, x);  // dz/dx = 2x = 6
    backward(sum_all(z));
    EXPECT_FLOAT_EQ(x->grad().item(), 6.0f);
}

TEST(Tape, ComposedGraphMatchesFiniteDifferences) {
    Rng rng(17);
    const Tensor x0 = kink_free_tensor({1, 2, 6, 6}, rng);
    const Tensor w0 = kink_free_tensor({2, 2, 3, 3}, rng);
    const Tensor t0 = kink_free_tensor({1, 2, 6, 6}, rng);

    const auto value_at = [&](const Tensor& xv) {
        const Var h = relu(conv2d(constant(xv), constant(w0), nullptr, 1, 1));
        return mse(h, constant(t0))->scalar();
    };
    const Var x = leaf(x0, true);
    const Var h = relu(conv2d(x, constant(w0), nullptr, 1, 1));
    backward(mse(h, constant(t0)));
    EXPECT_LT(rel_err(x->grad(), finite_diff(value_at, x0)), 1e-3);
}

TEST(Tape, GradChecksAcrossOps) {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x0 = kink_free_tensor({1, 1, 4, 5}, rng);
        const Var x = leaf(x0, true);
        const Tensor y0 = kink_free_tensor({1, 1, 4, 5}, rng);

        struct Case {
            const char* name;
            std::function<Var(const Var&)> op;
        };
        const Case cases[] = {
            {"sigmoid-mse",
             [&](const Var& v) { return mse(sigmoid(v), constant(y0)); }},
            {"tanh-mean", [&](const Var& v) { return mean_all(tape::tanh(v)); }},
            {"lrelu-sum",
             [&](const Var& v) { return sum_all(leaky_relu(v, 0.3f)); }},
            {"tv", [&](const Var& v) { return tv(v); }},
            {"mul-mean", [&](const Var& v) { return mean_all(mul(v, constant(y0))); }},
            {"upsample-mse",
             [&](const Var& v) { return mse(upsample2x(v), constant(Tensor({1, 1, 8, 10}))); }},
        };
        for (const auto& c : cases) {
            x->zero_grad();
            backward(c.op(x));
            const auto value_at = [&](const Tensor& xv) {
                return c.op(constant(xv))->scalar();
            };
            EXPECT_LT(rel_err(x->grad(), finite_diff(value_at, x0)), 1e-3) << c.name;
        }
    }
}

TEST(Tape, MeanPerItemAndChannelBias) {
    Rng rng(31);
    const Tensor x0 = kink_free_tensor({2, 3, 4, 4}, rng);
    const Var x = leaf(x0, true);
    const Var m = mean_per_item(x);
    EXPECT_EQ(m->value.shape, (Shape4{2, 1, 1, 1}));
    backward(sum_all(m));
    for (float v : x->grad().data) EXPECT_NEAR(v, 1.0 / 48.0, 1e-7);

    const Tensor b0 = kink_free_tensor({2, 3, 1, 1}, rng);
    const Var xb = leaf(x0, true);
    const Var bias = leaf(b0, true);
    backward(sum_all(add_channel_bias(xb, bias)));
    for (float v : bias->grad().data) EXPECT_FLOAT_EQ(v, 16.0f);
}

TEST(Tape, TvRampAndCheckerboard) {
    // 1D ramp [0,1,2]: TV = 2, endpoint grads -1/+1, middle 0.
    const Var ramp = leaf(Tensor::from({1, 1, 1, 3}, {0.0f, 1.0f, 2.0f}), true);
    const Var t = tv(ramp);
    EXPECT_FLOAT_EQ(t->value.item(), 2.0f);
    backward(t);
    EXPECT_FLOAT_EQ(ramp->grad().data[0], -1.0f);
    EXPECT_FLOAT_EQ(ramp->grad().data[1], 0.0f);
    EXPECT_FLOAT_EQ(ramp->grad().data[2], 1.0f);

    // 2x2 checkerboard: all 4 adjacent pairs differ by 1.
    const Var cb = constant(Tensor::from({1, 1, 2, 2}, {0.0f, 1.0f, 1.0f, 0.0f}));
    EXPECT_FLOAT_EQ(tv(cb)->value.item(), 4.0f);

    // Shift invariance.
    const Var cb_shift = add_scalar(cb, 0.37f);
    EXPECT_NEAR(tv(cb_shift)->value.item(), 4.0f, 1e-5);

    EXPECT_FLOAT_EQ(tv(constant(Tensor::full({1, 3, 4, 4}, 0.8f)))->value.item(), 0.0f);
}

TEST(Tape, AdamZeroGradNoChange) {
    AdamState st;
    Tensor p = Tensor::full({1, 1, 1, 4}, 2.5f);
    const Tensor g({1, 1, 1, 4});
    Tensor* ps[] = {&p};
    const Tensor* gs[] = {&g};
    adam_step(st, ps, gs);
    for (float v : p.data) EXPECT_FLOAT_EQ(v, 2.5f);
    EXPECT_EQ(st.step_count, 1);
}

TEST(Tape, AdamFirstStepMagnitude) {
    AdamState st;  // lr 1e-3
    Tensor p({1, 1, 1, 3});
    const Tensor g = Tensor::full({1, 1, 1, 3}, 1.0f);
    Tensor* ps[] = {&p};
    const Tensor* gs[] = {&g};
    adam_step(st, ps, gs);
    for (float v : p.data) EXPECT_NEAR(v, -1e-3, 1e-8);
}

TEST(Tape, AdamDescendsQuadratic) {
    AdamState st;
    st.lr = 0.05f;
    Tensor w = Tensor::scalar(1.0f);
    const auto loss = [&] { return static_cast<double>(w.item()) * w.item(); };
    const double l0 = loss();
    for (int i = 0; i < 2; ++i) {
        Tensor g = Tensor::scalar(2.0f * w.item());
        Tensor* ps[] = {&w};
        const Tensor* gs[] = {&g};
        adam_step(st, ps, gs);
    }
    EXPECT_LT(loss(), l0);
}

TEST(Tape, OpsArePure) {
    Rng rng(41);
    const Tensor x0 = rng.normal_tensor({1, 3, 5, 5});
    const Tensor w0 = rng.normal_tensor({2, 3, 3, 3});
    const Var o1 = conv2d(constant(x0), constant(w0), nullptr, 1, 1);
    const Var o2 = conv2d(constant(x0), constant(w0), nullptr, 1, 1);
    EXPECT_EQ(o1->value.data, o2->value.data);
}
