#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gdr/nn.hpp"
#include "gdr/tape.hpp"
#include "gdr/tensor.hpp"

namespace gdr::tdm {

// A network as a taped callable; lets tests pass closures (identity,
// constant discriminators) where the spec exercises the loss algebra.
using Net = std::function<tape::Var(const tape::Var&)>;

struct TdmConfig {
    float lambda1 = 1.0f;
    float lambda2 = 0.0f;
    float lambda3 = 0.0f;
    float lr = 1e-3f;
    int steps_per_timestep = 1;
    bool reinit_per_timestep = false;

    void validate() const {
        if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0)
            throw ValueError("tdm: negative loss weight");
        if (lambda1 == 0 && lambda2 == 0 && lambda3 == 0)
            throw ValueError("tdm: at least one lambda must be positive");
    }
};

struct TdmLosses {
    double rec = 0.0;
    double pec = 0.0;
    double gan = 0.0;
    double phi = 0.0;
};

// L_rec, L_pec, L_gan and their weighted sum over the concatenated batch
// [x0g, x0r]. x0r may have batch 0 (no referred images).
TdmLosses tdm_losses(const Tensor& x0g_hat, const Tensor& x0r_hat, const Tensor& y,
                     const Net& phi, const Net& dis, const Net& vfeat,
                     const TdmConfig& cfg);

// -log D(y) - log(1 - D(phi_out)); y real, phi outputs fake.
double discriminator_loss(const Tensor& y, const Tensor& phi_out, const Net& dis);

// Owns phi, D and their Adam states for one restoration job. Warm-started
// across timesteps by default; reinit() gives the per-timestep variant.
class Tdm {
public:
    Tdm(TdmConfig cfg, uint64_t seed);

    struct StepRecord {
        TdmLosses losses;
        double dis_loss = 0.0;
        int steps_run = 0;
    };

    // One TDM update (cfg.steps_per_timestep Adam steps on phi, then D).
    // Inputs are detached copies; x0 tensors and the denoiser are never
    // touched. timestep is only used in error reports.
    StepRecord step(const Tensor& x0g_hat, const Tensor& x0r_hat, const Tensor& y,
                    const nn::FeatureExtractor& vfeat, int timestep);

    void reinit(uint64_t seed);

    Tensor apply_phi(const Tensor& x) const;
    Net phi_net() const;
    Net dis_net() const;
    const nn::DegradationNet& phi() const { return phi_; }
    const TdmConfig& config() const { return cfg_; }

private:
    TdmConfig cfg_;
    nn::DegradationNet phi_;
    nn::Discriminator dis_;
    tape::AdamState opt_phi_, opt_dis_;
};

struct StandaloneTrace {
    std::vector<TdmLosses> losses;
    std::vector<double> dis_losses;
};

// Repeated tdm steps on fixed clean inputs against a fixed degraded target;
// the TDM-only training mode used for diagnostics and the phi visualization.
StandaloneTrace standalone_train(Tdm& tdm, const nn::FeatureExtractor& vfeat,
                                 std::span<const Tensor> clean_model_range,
                                 const Tensor& y_model_range, int steps);

}  // namespace gdr::tdm
