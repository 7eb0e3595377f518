#include "gdr/pipeline.hpp"

#include <cmath>
#include <sstream>

#include "gdr/kernels.hpp"

namespace gdr::pipeline {

using diffusion::estimate_x0;
using diffusion::guided_sample_step;
using diffusion::sample_step;

Tensor to_model_range(const Tensor& unit) {
    Tensor out(unit.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = unit.data[i] * 2.0f - 1.0f;
    return out;
}

Tensor to_unit_range(const Tensor& model) {
    Tensor out(model.shape);
    for (int64_t i = 0; i < out.numel(); ++i)
        out.data[i] = std::min(std::max((model.data[i] + 1.0f) * 0.5f, 0.0f), 1.0f);
    return out;
}

TaskPreset paper_preset(const std::string& task) {
    TaskPreset p;
    p.name = "paper:" + task;
    p.tdg.b1 = 600;
    p.tdg.b2 = 50;
    if (task == "dehaze") {
        p.tdm.lambda1 = 0.2f;
        p.tdm.lambda2 = 0.5f;
        p.tdm.lambda3 = 0.2f;
        p.tdg.gamma1 = 2.0f;
        p.tdg.gamma2 = 1.0f;
        p.tdg.gamma3 = 1e-3f;
        p.tdg.gamma4 = 0.0f;
        p.tdg.gamma5 = 1e-4f;
        p.tdg.s = 25000.0f;
    } else if (task == "lowlight") {
        p.tdm.lambda1 = 0.05f;
        p.tdm.lambda2 = 0.4f;
        p.tdm.lambda3 = 0.5f;
        p.tdg.gamma1 = 0.0f;
        p.tdg.gamma2 = 1.0f;
        p.tdg.gamma3 = 2e-3f;
        p.tdg.gamma4 = 1e-4f;
        p.tdg.gamma5 = 5e-5f;
        p.tdg.s = 50000.0f;
    } else if (task == "denoise") {
        p.tdm.lambda1 = 3.0f;
        p.tdm.lambda2 = 5e-3f;
        p.tdm.lambda3 = 1e-3f;
        p.tdg.gamma1 = 1.0f;
        p.tdg.gamma2 = 0.9f;
        p.tdg.gamma3 = 0.0f;
        p.tdg.gamma4 = 0.0f;
        p.tdg.gamma5 = 5e-4f;
        p.tdg.s = 5000.0f;
    } else {
        throw ValueError("unknown task '" + task + "' (dehaze|lowlight|denoise)");
    }
    return p;
}

TaskPreset toy_preset(const std::string& task, int T) {
    TaskPreset p;
    p.name = "toy:" + task;
    p.tdg.b1 = T * 6 / 10;
    p.tdg.b2 = T / 20;
    if (task == "dehaze") {
        p.tdm.lambda1 = 1.0f;
        p.tdm.lambda2 = 0.1f;
        p.tdm.lambda3 = 0.05f;
        p.tdg.gamma1 = 2.0f;
        p.tdg.gamma2 = 1.0f;
        p.tdg.gamma3 = 5e-3f;
        p.tdg.gamma4 = 0.0f;
        p.tdg.gamma5 = 1e-3f;
        p.tdg.s = 1500.0f;
    } else if (task == "lowlight") {
        p.tdm.lambda1 = 0.5f;
        p.tdm.lambda2 = 0.2f;
        p.tdm.lambda3 = 0.1f;
        p.tdg.gamma1 = 0.0f;
        p.tdg.gamma2 = 1.0f;
        p.tdg.gamma3 = 5e-3f;
        p.tdg.gamma4 = 1e-3f;
        p.tdg.gamma5 = 1e-3f;
        p.tdg.s = 2000.0f;
    } else if (task == "denoise") {
        p.tdm.lambda1 = 1.5f;
        p.tdm.lambda2 = 0.05f;
        p.tdm.lambda3 = 0.02f;
        p.tdg.gamma1 = 2.0f;
        p.tdg.gamma2 = 1.0f;
        p.tdg.gamma3 = 0.0f;
        p.tdg.gamma4 = 0.0f;
        p.tdg.gamma5 = 2e-3f;
        p.tdg.s = 1500.0f;
    } else {
        throw ValueError("unknown task '" + task + "' (dehaze|lowlight|denoise)");
    }
    return p;
}

TaskPreset lookup_preset(const std::string& family, const std::string& task, int T) {
    if (family == "paper") return paper_preset(task);
    if (family == "toy") return toy_preset(task, T);
    throw ValueError("unknown preset family '" + family + "' (paper|toy)");
}

std::string telemetry_line(const TelemetryRecord& r) {
    std::ostringstream os;
    os << "t=" << r.t << " stage=" << r.stage << " gnorm=" << r.g_norm
       << " lrec=" << r.tdm_losses.rec << " lpec=" << r.tdm_losses.pec
       << " lgan=" << r.tdm_losses.gan << " lphi=" << r.tdm_losses.phi
       << " ldis=" << r.dis_loss << " grec=" << r.guide_rec << " gpec=" << r.guide_pec
       << " gadv=" << r.guide_adv << " gtv=" << r.guide_tv << " ldres=" << r.dres_loss;
    return os.str();
}

namespace {

void check_finite_or_abort(const Tensor& x, const char* what, int t) {
    if (!x.all_finite())
        throw std::runtime_error(std::string("restore: non-finite ") + what +
                                 " at t=" + std::to_string(t));
}

Tensor slice_item(const Tensor& batch, int64_t j) {
    const int64_t per = batch.shape.c * batch.shape.h * batch.shape.w;
    Tensor out({1, batch.shape.c, batch.shape.h, batch.shape.w});
    std::copy(batch.data.begin() + j * per, batch.data.begin() + (j + 1) * per,
              out.data.begin());
    return out;
}

bool stage_is_inert(tdg::Stage st, const tdg::GuidanceConfig& c) {
    switch (st) {
        case tdg::Stage::First: return c.gamma1 == 0;
        case tdg::Stage::Second: return c.gamma2 == 0 && c.gamma3 == 0 && c.gamma4 == 0;
        case tdg::Stage::Third:
        default:
            return c.gamma2 == 0 && c.gamma3 == 0 && c.gamma4 == 0 && c.gamma5 == 0;
    }
}

double l2_norm(const Tensor& g) {
    return std::sqrt(kernels::active().dot(g.ptr(), g.ptr(), g.numel()));
}

RestoreResult restore_impl(const Tensor& y, const diffusion::Denoiser& den,
                           const diffusion::NoiseSchedule& sched,
                           const TaskPreset& preset, const RestoreOptions& opts,
                           const std::function<tdg::Stage(int)>& stage_fn) {
    preset.tdm.validate();
    preset.tdg.validate(sched.T);
    if (opts.k_referred < 0) throw ValueError("restore: k_referred must be >= 0");
    if (y.shape.n != 1 || y.shape.c != 3)
        throw ShapeError("restore: y must be (1,3,H,W), got " + y.shape.str());
    if (!y.all_finite()) throw ValueError("restore: non-finite y");

    const int k = opts.k_referred;
    Rng rng_g(Rng::mix(opts.seed, 0));
    std::vector<Rng> rng_r;
    for (int j = 0; j < k; ++j) rng_r.emplace_back(Rng::mix(opts.seed, 1 + j));

    tdm::Tdm tdm_state(preset.tdm, Rng::mix(opts.seed, 0x7D51));
    tdg::Tdg tdg_state(preset.tdg, Rng::mix(opts.seed, 0x7D52));
    const nn::FeatureExtractor vfeat;  // fixed seed, shared by TDM and TDG

    Tensor xg = rng_g.normal_tensor(y.shape);
    std::vector<Tensor> xr;
    for (int j = 0; j < k; ++j) xr.push_back(rng_r[j].normal_tensor(y.shape));

    RestoreResult res;
    res.telemetry.reserve(static_cast<size_t>(sched.T));
    const int64_t per = y.shape.c * y.shape.h * y.shape.w;

    for (int t = sched.T; t >= 1; --t) {
        const Tensor eps_g = den.predict_eps(xg, t);
        check_finite_or_abort(eps_g, "eps_hat(guided)", t);
        const Tensor x0g = estimate_x0(xg, eps_g, t, sched);

        Tensor x0r_batch({k, y.shape.c, y.shape.h, y.shape.w});
        for (int j = 0; j < k; ++j) {
            const Tensor eps_r = den.predict_eps(xr[static_cast<size_t>(j)], t);
            check_finite_or_abort(eps_r, "eps_hat(referred)", t);
            const Tensor x0r = estimate_x0(xr[static_cast<size_t>(j)], eps_r, t, sched);
            std::copy(x0r.data.begin(), x0r.data.end(),
                      x0r_batch.data.begin() + j * per);
        }

        if (preset.tdm.reinit_per_timestep)
            tdm_state.reinit(Rng::mix(Rng::mix(opts.seed, 0x7D51), static_cast<uint64_t>(t)));
        const auto tdm_rec = tdm_state.step(x0g, x0r_batch, y, vfeat, t);

        const tdg::Stage stage = stage_fn(t - 1);
        tdg::StageGuidance sg;
        if (stage_is_inert(stage, preset.tdg))
            sg.G = Tensor(y.shape);
        else
            sg = tdg_state.guided(stage, x0g, x0r_batch, y, tdm_state.phi_net(), vfeat);

        xg = guided_sample_step(xg, x0g, t, sched, sg.G, preset.tdg.s, rng_g);
        check_finite_or_abort(xg, "x(guided)", t);

        const bool referred_guided =
            stage == tdg::Stage::First || preset.tdg.referred_guided_late_stages;
        for (int j = 0; j < k; ++j) {
            const Tensor x0r = slice_item(x0r_batch, j);
            Rng& rr = rng_r[static_cast<size_t>(j)];
            if (referred_guided && preset.tdg.gamma1 != 0) {
                const Tensor Gr = tdg_state.referred(x0r, y, tdm_state.phi_net());
                xr[static_cast<size_t>(j)] =
                    guided_sample_step(xr[static_cast<size_t>(j)], x0r, t, sched, Gr,
                                       preset.tdg.s, rr);
            } else {
                xr[static_cast<size_t>(j)] =
                    sample_step(xr[static_cast<size_t>(j)], x0r, t, sched, rr);
            }
            check_finite_or_abort(xr[static_cast<size_t>(j)], "x(referred)", t);
        }

        TelemetryRecord rec;
        rec.t = t;
        rec.stage = stage == tdg::Stage::First ? 1 : (stage == tdg::Stage::Second ? 2 : 3);
        rec.g_norm = l2_norm(sg.G);
        rec.tdm_losses = tdm_rec.losses;
        rec.dis_loss = tdm_rec.dis_loss;
        rec.guide_rec = sg.loss_rec;
        rec.guide_pec = sg.loss_pec;
        rec.guide_adv = sg.loss_adv;
        rec.guide_tv = sg.loss_tv;
        rec.dres_loss = sg.dres_loss;
        res.telemetry.push_back(rec);

        if (opts.observe_guided) opts.observe_guided(t, xg);
    }

    res.output = xg;
    return res;
}

}  // namespace

RestoreResult restore(const Tensor& y, const diffusion::Denoiser& den,
                      const diffusion::NoiseSchedule& sched, const TaskPreset& preset,
                      const RestoreOptions& opts) {
    return restore_impl(y, den, sched, preset, opts, [&](int t0) {
        return tdg::stage_of(t0, preset.tdg, sched.T);
    });
}

AblationVariant parse_variant(const std::string& name) {
    if (name == "UG" || name == "ug" || name == "U.G.") return AblationVariant::UG;
    if (name == "-F.S." || name == "minusFS" || name == "mfs") return AblationVariant::MinusFS;
    if (name == "-S.S." || name == "minusSS" || name == "mss") return AblationVariant::MinusSS;
    if (name == "-T.S." || name == "minusTS" || name == "mts") return AblationVariant::MinusTS;
    if (name == "TDG" || name == "tdg") return AblationVariant::TDG;
    throw ValueError("unknown ablation variant '" + name + "'");
}

std::string variant_name(AblationVariant v) {
    switch (v) {
        case AblationVariant::UG: return "U.G.";
        case AblationVariant::MinusFS: return "-F.S.";
        case AblationVariant::MinusSS: return "-S.S.";
        case AblationVariant::MinusTS: return "-T.S.";
        case AblationVariant::TDG:
        default: return "TDG";
    }
}

RestoreResult ablate(const Tensor& y, const diffusion::Denoiser& den,
                     const diffusion::NoiseSchedule& sched, const TaskPreset& preset,
                     AblationVariant variant, const RestoreOptions& opts) {
    const int b1 = preset.tdg.b1;
    const int b2 = preset.tdg.b2;
    std::function<tdg::Stage(int)> stage_fn;
    switch (variant) {
        case AblationVariant::TDG:
            return restore(y, den, sched, preset, opts);
        case AblationVariant::UG:
            stage_fn = [](int) { return tdg::Stage::First; };
            break;
        case AblationVariant::MinusFS:
            stage_fn = [b2](int t0) {
                return t0 > b2 ? tdg::Stage::Second : tdg::Stage::Third;
            };
            break;
        case AblationVariant::MinusSS:
            stage_fn = [b2](int t0) {
                return t0 > b2 ? tdg::Stage::First : tdg::Stage::Third;
            };
            break;
        case AblationVariant::MinusTS:
            stage_fn = [b1](int t0) {
                return t0 > b1 ? tdg::Stage::First : tdg::Stage::Second;
            };
            break;
    }
    return restore_impl(y, den, sched, preset, opts, stage_fn);
}

}  // namespace gdr::pipeline
