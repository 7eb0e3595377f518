#pragma once

#include <cstdint>
#include <functional>

#include "gdr/nn.hpp"
#include "gdr/tape.hpp"
#include "gdr/tensor.hpp"

namespace gdr::tdg {

using Net = std::function<tape::Var(const tape::Var&)>;

enum class Stage { First, Second, Third };

// Timesteps here are 0-based (T-1 .. 0); a boundary timestep belongs to the
// later (smaller-t) stage, so with defaults 600 is Second and 50 is Third.
struct GuidanceConfig {
    int b1 = 600;
    int b2 = 50;
    float gamma1 = 1.0f, gamma2 = 0.0f, gamma3 = 0.0f, gamma4 = 0.0f, gamma5 = 0.0f;
    float s = 1.0f;
    bool referred_guided_late_stages = false;

    void validate(int T) const {
        if (gamma1 < 0 || gamma2 < 0 || gamma3 < 0 || gamma4 < 0 || gamma5 < 0)
            throw ValueError("tdg: negative guidance weight");
        if (!(s > 0.0f)) throw ValueError("tdg: guidance scale must be positive");
        if (!(T - 1 > b1 && b1 > b2 && b2 >= 0))
            throw ValueError("tdg: need T-1 > b1 > b2 >= 0, got T=" +
                             std::to_string(T) + " b1=" + std::to_string(b1) +
                             " b2=" + std::to_string(b2));
    }
};

Stage stage_of(int t, const GuidanceConfig& cfg, int T);

// Plain value of the anisotropic TV loss (spatial sum of |forward diffs|,
// averaged over batch and channels).
double tv_loss(const Tensor& x);

// G = gamma1 * grad_{x0} ||y - phi(x0)||^2.
Tensor guidance_stage1(const Tensor& x0_hat, const Tensor& y, const Net& phi,
                       float gamma1);

struct StageGuidance {
    Tensor G;
    double loss_rec = 0.0;
    double loss_pec = 0.0;
    double loss_adv = 0.0;
    double loss_tv = 0.0;
    double dres_loss = 0.0;
    bool dres_updated = false;
};

// Stage 2: gamma2 * grad||y-phi(x0g)||^2 + gamma3 * grad||V(y)-V(phi(x0g))||^2
// + gamma4 * grad log(1-Dres(x0g - y)); afterwards Dres takes one Adam step
// (real: [x0g,x0r]-phi([.]) residuals, fake: x0g-y). With gamma4 == 0 the
// residual discriminator is neither evaluated nor updated.
StageGuidance guidance_stage2(const Tensor& x0g_hat, const Tensor& x0r_hat,
                              const Tensor& y, const Net& phi,
                              const nn::FeatureExtractor& vfeat,
                              nn::Discriminator& dres, tape::AdamState& dres_opt,
                              const GuidanceConfig& cfg);

// Stage 3: stage-2 terms plus gamma5 * grad TV(x0g).
StageGuidance guidance_stage3(const Tensor& x0g_hat, const Tensor& x0r_hat,
                              const Tensor& y, const Net& phi,
                              const nn::FeatureExtractor& vfeat,
                              nn::Discriminator& dres, tape::AdamState& dres_opt,
                              const GuidanceConfig& cfg);

// Owns the residual discriminator (separate network from TDM's D; it sees
// difference maps, not images).
class Tdg {
public:
    Tdg(GuidanceConfig cfg, uint64_t seed);

    StageGuidance guided(Stage stage, const Tensor& x0g_hat, const Tensor& x0r_hat,
                         const Tensor& y, const Net& phi,
                         const nn::FeatureExtractor& vfeat);

    // Stage-1 rule for one referred trajectory.
    Tensor referred(const Tensor& x0r_item, const Tensor& y, const Net& phi) const;

    const GuidanceConfig& config() const { return cfg_; }
    void reinit(uint64_t seed);

private:
    GuidanceConfig cfg_;
    nn::Discriminator dres_;
    tape::AdamState opt_;
};

}  // namespace gdr::tdg
