#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gdr/diffusion.hpp"
#include "gdr/tdg.hpp"
#include "gdr/tdm.hpp"
#include "gdr/tensor.hpp"

namespace gdr::pipeline {

// Value-range conversions; everything inside the sampler runs in [-1,1],
// images and metrics live in [0,1].
Tensor to_model_range(const Tensor& unit);
Tensor to_unit_range(const Tensor& model);

struct TaskPreset {
    std::string name;
    tdm::TdmConfig tdm;
    tdg::GuidanceConfig tdg;
};

// Verbatim task weights (lambda1-3, gamma1-5, s) with stage bounds 600/50;
// tuned for the full-scale 256x256 setting, kept for provenance.
TaskPreset paper_preset(const std::string& task);

// Same structure re-tuned for the 32x32 shapes task; stage bounds scale
// with T. The default for desk-scale runs.
TaskPreset toy_preset(const std::string& task, int T);

TaskPreset lookup_preset(const std::string& family, const std::string& task, int T);

struct TelemetryRecord {
    int t = 0;              // schedule timestep (1-based)
    int stage = 0;          // 1, 2 or 3
    double g_norm = 0.0;    // l2 norm of the applied guidance tensor
    tdm::TdmLosses tdm_losses;
    double dis_loss = 0.0;
    double guide_rec = 0.0, guide_pec = 0.0, guide_adv = 0.0, guide_tv = 0.0;
    double dres_loss = 0.0;
};

std::string telemetry_line(const TelemetryRecord& r);

struct RestoreOptions {
    int k_referred = 1;
    uint64_t seed = 0;
    diffusion::StepObserver observe_guided;  // called after each step with x^g_{t-1}
};

struct RestoreResult {
    Tensor output;  // x^g_0 in model range
    std::vector<TelemetryRecord> telemetry;
};

// One full restoration: guided + k referred trajectories from noise, per
// timestep denoise -> x0 estimates -> TDM step -> stage guidance -> guided
// posterior step. y must be in model range and match the denoiser's shape.
RestoreResult restore(const Tensor& y, const diffusion::Denoiser& den,
                      const diffusion::NoiseSchedule& sched, const TaskPreset& preset,
                      const RestoreOptions& opts);

enum class AblationVariant { UG, MinusFS, MinusSS, MinusTS, TDG };

AblationVariant parse_variant(const std::string& name);
std::string variant_name(AblationVariant v);

// Same loop with a remapped stage rule: UG applies stage 1 everywhere;
// -F.S./-S.S./-T.S. drop a stage and extend the adjacent one over its range.
RestoreResult ablate(const Tensor& y, const diffusion::Denoiser& den,
                     const diffusion::NoiseSchedule& sched, const TaskPreset& preset,
                     AblationVariant variant, const RestoreOptions& opts);

}  // namespace gdr::pipeline
