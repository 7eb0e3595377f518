// Command-line front end: dataset synthesis, tiny-denoiser training,
// single-image restoration, and the benchmark/ablation harness.
//
// Exit codes: 0 success, 1 internal failure, 2 bad input.

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "gdr/degrade.hpp"
#include "gdr/diffusion.hpp"
#include "gdr/io.hpp"
#include "gdr/kernels.hpp"
#include "gdr/metrics.hpp"
#include "gdr/pipeline.hpp"
#include "gdr/tdm.hpp"

namespace fs = std::filesystem;
using namespace gdr;

namespace {

struct BadInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Shared option plumbing. A flat key-value config file may seed any option;
// command-line flags override it. Unknown config keys are rejected.

struct CommonOpts {
    std::string config_path;
    std::string kernels = "auto";
    uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--config", c.config_path, "key = value config file");
    cmd->add_option("--kernels", c.kernels, "auto|scalar|avx2");
    cmd->add_option("--seed", c.seed, "master seed");
}

void apply_kernels(const std::string& sel) {
    kernels::select(kernels::parse_select(sel));
}

struct ScheduleOpts {
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
};

void add_schedule(CLI::App* cmd, ScheduleOpts& s) {
    cmd->add_option("--T", s.T, "diffusion timesteps");
    cmd->add_option("--beta-start", s.beta_start);
    cmd->add_option("--beta-end", s.beta_end);
}

struct PresetOpts {
    std::string task = "denoise";
    std::string family = "toy";
    int k_referred = 1;
    double s_override = -1.0;
    std::vector<double> lambdas;  // 3 values
    std::vector<double> gammas;   // 5 values
    int b1 = -1, b2 = -1;
    int tdm_steps = -1;
    bool tdm_reinit = false;
    bool referred_guided_late = false;
};

void add_preset(CLI::App* cmd, PresetOpts& p) {
    cmd->add_option("--task", p.task, "dehaze|lowlight|denoise");
    cmd->add_option("--preset", p.family, "toy|paper");
    cmd->add_option("--k", p.k_referred, "referred image count");
    cmd->add_option("--s", p.s_override, "guidance scale override");
    cmd->add_option("--lambda", p.lambdas, "lambda1..3 override")->expected(3);
    cmd->add_option("--gamma", p.gammas, "gamma1..5 override")->expected(5);
    cmd->add_option("--b1", p.b1, "stage boundary 1 override");
    cmd->add_option("--b2", p.b2, "stage boundary 2 override");
    cmd->add_option("--tdm-steps", p.tdm_steps, "TDM Adam steps per timestep");
    cmd->add_flag("--tdm-reinit", p.tdm_reinit, "reinit phi/D every timestep");
    cmd->add_flag("--referred-guided-late", p.referred_guided_late,
                  "apply stage-1 guidance to referred images in stages 2-3");
}

pipeline::TaskPreset resolve_preset(const PresetOpts& p, int T) {
    pipeline::TaskPreset preset = pipeline::lookup_preset(p.family, p.task, T);
    if (p.s_override >= 0.0) preset.tdg.s = static_cast<float>(p.s_override);
    if (!p.lambdas.empty()) {
        preset.tdm.lambda1 = static_cast<float>(p.lambdas[0]);
        preset.tdm.lambda2 = static_cast<float>(p.lambdas[1]);
        preset.tdm.lambda3 = static_cast<float>(p.lambdas[2]);
    }
    if (!p.gammas.empty()) {
        preset.tdg.gamma1 = static_cast<float>(p.gammas[0]);
        preset.tdg.gamma2 = static_cast<float>(p.gammas[1]);
        preset.tdg.gamma3 = static_cast<float>(p.gammas[2]);
        preset.tdg.gamma4 = static_cast<float>(p.gammas[3]);
        preset.tdg.gamma5 = static_cast<float>(p.gammas[4]);
    }
    if (p.b1 >= 0) preset.tdg.b1 = p.b1;
    if (p.b2 >= 0) preset.tdg.b2 = p.b2;
    if (p.tdm_steps >= 0) preset.tdm.steps_per_timestep = p.tdm_steps;
    preset.tdm.reinit_per_timestep = p.tdm_reinit;
    preset.tdg.referred_guided_late_stages = p.referred_guided_late;
    return preset;
}

// Merge a config file into already-parsed options; CLI flags win.
template <typename Fn>
void load_config_into(const CommonOpts& c, Fn&& apply) {
    if (c.config_path.empty()) return;
    io::KeyValues kv = io::KeyValues::load(c.config_path);
    apply(kv);
    kv.reject_unknown();
}

// ---------------------------------------------------------------------------
// Denoiser sources: a trained parameter bundle or an analytic GMM spec.

std::string param_name(size_t i) { return "p" + std::to_string(i); }

void save_denoiser(const std::string& path, const nn::TinyDenoiser& net,
                   const ScheduleOpts& sched, int image_side) {
    io::TensorBundle b;
    b.meta["kind"] = "tiny_denoiser";
    b.meta["T"] = std::to_string(sched.T);
    b.meta["beta_start"] = std::to_string(sched.beta_start);
    b.meta["beta_end"] = std::to_string(sched.beta_end);
    b.meta["base_channels"] = std::to_string(net.cfg.base_channels);
    b.meta["temb_dim"] = std::to_string(net.cfg.temb_dim);
    b.meta["image_side"] = std::to_string(image_side);
    b.meta["param_count"] = std::to_string(net.param_count());
    const auto params = net.params();
    for (size_t i = 0; i < params.size(); ++i)
        b.tensors.emplace_back(param_name(i), params[i]->value);
    io::write_bundle(path, b);
}

struct LoadedDenoiser {
    std::unique_ptr<diffusion::Denoiser> den;
    ScheduleOpts sched;
    int image_side = 32;
};

LoadedDenoiser load_tiny_denoiser(const std::string& path) {
    const io::TensorBundle b = io::read_bundle(path);
    if (!b.meta.count("kind") || b.meta.at("kind") != "tiny_denoiser")
        throw BadInput("denoiser file '" + path + "' is not a tiny_denoiser bundle");
    LoadedDenoiser out;
    out.sched.T = std::stoi(b.meta.at("T"));
    out.sched.beta_start = std::stod(b.meta.at("beta_start"));
    out.sched.beta_end = std::stod(b.meta.at("beta_end"));
    out.image_side = std::stoi(b.meta.at("image_side"));
    nn::TinyDenoiserConfig cfg;
    cfg.base_channels = std::stoll(b.meta.at("base_channels"));
    cfg.temb_dim = std::stoll(b.meta.at("temb_dim"));
    Rng dummy(0);
    auto model = std::make_unique<diffusion::TinyDenoiserModel>(cfg, dummy);
    auto params = model->net().params();
    if (params.size() != b.tensors.size())
        throw BadInput("denoiser file: expected " + std::to_string(params.size()) +
                       " tensors, found " + std::to_string(b.tensors.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        if (b.tensors[i].first != param_name(i))
            throw BadInput("denoiser file: unexpected tensor name '" +
                           b.tensors[i].first + "'");
        check_same_shape(params[i]->value, b.tensors[i].second, "load_denoiser");
        params[i]->value = b.tensors[i].second;
    }
    out.den = std::move(model);
    return out;
}

diffusion::GmmPrior load_gmm_spec(const std::string& path) {
    io::KeyValues kv = io::KeyValues::load(path);
    if (kv.get_string("type", "") != "gmm")
        throw BadInput("gmm spec '" + path + "': missing 'type = gmm'");
    const int K = static_cast<int>(kv.get_int("components", 0));
    if (K < 1) throw BadInput("gmm spec: components must be >= 1");
    const std::string shape_str = kv.get_string("shape", "3x8x8");
    Shape4 item{1, 0, 0, 0};
    if (sscanf(shape_str.c_str(), "%ldx%ldx%ld", &item.c, &item.h, &item.w) != 3)
        throw BadInput("gmm spec: bad shape '" + shape_str + "' (want CxHxW)");

    diffusion::GmmPrior prior;
    for (int k = 0; k < K; ++k) {
        const std::string idx = std::to_string(k);
        prior.weights.push_back(kv.get_double("weight_" + idx, 1.0 / K));
        const std::string mean_file = kv.get_string("mean_file_" + idx, "");
        if (!mean_file.empty()) {
            Tensor m = io::read_tensor(mean_file);
            prior.means.push_back(std::move(m));
        } else {
            prior.means.push_back(Tensor::full(
                item, static_cast<float>(kv.get_double("mean_" + idx, 0.0))));
        }
        prior.variances.push_back(Tensor::full(
            item, static_cast<float>(kv.get_double("var_" + idx, 0.01))));
    }
    kv.reject_unknown();
    prior.validate();
    return prior;
}

LoadedDenoiser load_denoiser(const std::string& spec, const ScheduleOpts& cli_sched) {
    if (spec.empty()) throw BadInput("no denoiser given (--denoiser)");
    if (spec.rfind("gmm:", 0) == 0) {
        LoadedDenoiser out;
        out.sched = cli_sched;
        const diffusion::NoiseSchedule sched = diffusion::build_linear_schedule(
            cli_sched.T, cli_sched.beta_start, cli_sched.beta_end);
        diffusion::GmmPrior prior = load_gmm_spec(spec.substr(4));
        out.image_side = static_cast<int>(prior.means[0].shape.h);
        out.den = std::make_unique<diffusion::GmmDenoiser>(std::move(prior), sched);
        return out;
    }
    return load_tiny_denoiser(spec);
}

// ---------------------------------------------------------------------------
// Dataset helpers.

std::string pair_name(const char* stem, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03d.ppm", stem, i);
    return buf;
}

degrade::ImageSource make_source(const std::string& source, int side, uint64_t seed) {
    if (source == "shapes32") {
        return [seed](int idx) {
            Rng r(Rng::mix(seed, static_cast<uint64_t>(idx)));
            return degrade::shapes32_image(r);
        };
    }
    if (!fs::is_directory(source))
        throw BadInput("image source '" + source + "' is not a directory or 'shapes32'");
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(source)) {
        const std::string ext = e.path().extension().string();
        if (ext == ".ppm" || ext == ".pgm") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw BadInput("no .ppm/.pgm images in '" + source + "'");
    return [files, side](int idx) {
        const Tensor img = io::read_image(files[static_cast<size_t>(idx) % files.size()]);
        return degrade::center_crop_resize(img, side);
    };
}

struct DatasetOnDisk {
    std::vector<Tensor> clean, degraded;  // unit range
};

DatasetOnDisk read_dataset_dir(const std::string& dir) {
    DatasetOnDisk ds;
    for (int i = 0;; ++i) {
        const fs::path c = fs::path(dir) / pair_name("clean", i);
        const fs::path d = fs::path(dir) / pair_name("degraded", i);
        if (!fs::exists(c) || !fs::exists(d)) break;
        ds.clean.push_back(io::read_image(c.string()));
        ds.degraded.push_back(io::read_image(d.string()));
    }
    if (ds.clean.empty())
        throw BadInput("no clean_###.ppm/degraded_###.ppm pairs in '" + dir + "'");
    return ds;
}

void write_telemetry(const std::string& path,
                     const std::vector<pipeline::TelemetryRecord>& records) {
    if (path.empty()) return;
    std::ostringstream os;
    for (const auto& r : records) os << pipeline::telemetry_line(r) << "\n";
    io::write_text(path, os.str());
}

// ---------------------------------------------------------------------------
// Parallel map over image indices; results land by index (deterministic
// merge regardless of worker count).

template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Subcommands.

int cmd_make_data(const CommonOpts& common, const std::string& out_dir, int n,
                  const std::string& kind, const std::string& params,
                  const std::string& source, int side) {
    const degrade::DegradationSpec spec = degrade::DegradationSpec::parse(kind, params);
    const degrade::ImageSource src = make_source(source, side, common.seed);
    const degrade::PairedDataset ds = degrade::make_dataset(src, spec, n, common.seed);

    fs::create_directories(out_dir);
    for (int i = 0; i < n; ++i) {
        io::write_image((fs::path(out_dir) / pair_name("clean", i)).string(),
                        ds.clean[static_cast<size_t>(i)]);
        io::write_image((fs::path(out_dir) / pair_name("degraded", i)).string(),
                        ds.degraded[static_cast<size_t>(i)]);
    }
    io::write_text((fs::path(out_dir) / "manifest.txt").string(), ds.manifest);
    std::cout << "wrote " << n << " pairs to " << out_dir << "\n";
    return 0;
}

int cmd_train_denoiser(const CommonOpts& common, const ScheduleOpts& sched_opts,
                       const std::string& source, int n_images, int side, int steps,
                       int batch, double lr, int base_channels, int temb_dim,
                       const std::string& init_path, const std::string& out_path,
                       const std::string& loss_csv) {
    const degrade::ImageSource src = make_source(source, side, Rng::mix(common.seed, 11));
    std::vector<Tensor> dataset;
    for (int i = 0; i < n_images; ++i)
        dataset.push_back(pipeline::to_model_range(src(i)));

    const diffusion::NoiseSchedule sched = diffusion::build_linear_schedule(
        sched_opts.T, sched_opts.beta_start, sched_opts.beta_end);

    std::unique_ptr<nn::TinyDenoiser> net;
    ScheduleOpts effective = sched_opts;
    if (!init_path.empty()) {
        LoadedDenoiser loaded = load_tiny_denoiser(init_path);
        auto* model = dynamic_cast<diffusion::TinyDenoiserModel*>(loaded.den.get());
        net = std::make_unique<nn::TinyDenoiser>(std::move(model->net()));
        effective = loaded.sched;
    } else {
        Rng nr(Rng::mix(common.seed, 12));
        net = std::make_unique<nn::TinyDenoiser>(
            nn::TinyDenoiserConfig{base_channels, temb_dim}, nr);
    }
    std::cout << "parameters: " << net->param_count() << "\n";

    Rng tr(Rng::mix(common.seed, 13));
    const auto result = diffusion::train_tiny_denoiser(
        *net, dataset, sched, steps, batch, static_cast<float>(lr), tr);

    save_denoiser(out_path, *net, effective, side);
    if (!loss_csv.empty()) {
        std::ostringstream os;
        os << "step,loss\n";
        for (size_t i = 0; i < result.loss_trace.size(); ++i)
            os << i << "," << io::format_float(result.loss_trace[i], 6) << "\n";
        io::write_text(loss_csv, os.str());
    }
    if (!result.loss_trace.empty())
        std::cout << "final loss: " << result.loss_trace.back() << "\n";
    std::cout << "saved " << out_path << "\n";
    return 0;
}

int cmd_restore(const CommonOpts& common, const ScheduleOpts& cli_sched,
                const PresetOpts& preset_opts, const std::string& input,
                const std::string& output, const std::string& denoiser_spec,
                const std::string& gt_path, const std::string& telemetry_path) {
    if (!fs::exists(input)) throw BadInput("input image '" + input + "' not found");
    LoadedDenoiser loaded = load_denoiser(denoiser_spec, cli_sched);
    const diffusion::NoiseSchedule sched = diffusion::build_linear_schedule(
        loaded.sched.T, loaded.sched.beta_start, loaded.sched.beta_end);

    Tensor y01 = io::read_image(input);
    if (y01.shape.h != loaded.image_side || y01.shape.w != loaded.image_side)
        y01 = degrade::center_crop_resize(y01, loaded.image_side);
    const Tensor y = pipeline::to_model_range(y01);

    const pipeline::TaskPreset preset = resolve_preset(preset_opts, sched.T);
    pipeline::RestoreOptions opts;
    opts.seed = common.seed;
    opts.k_referred = preset_opts.k_referred;

    const pipeline::RestoreResult res = pipeline::restore(y, *loaded.den, sched,
                                                          preset, opts);
    const Tensor out01 = pipeline::to_unit_range(res.output);
    if (!output.empty()) io::write_image(output, out01);
    write_telemetry(telemetry_path, res.telemetry);

    if (!gt_path.empty()) {
        const Tensor gt = io::read_image(gt_path);
        std::cout << "psnr=" << io::format_float(metrics::psnr(out01, gt)) << " ssim="
                  << io::format_float(metrics::ssim(out01, gt)) << "\n";
    }
    std::cout << "restored " << input << " -> " << (output.empty() ? "(no file)" : output)
              << " (" << res.telemetry.size() << " steps)\n";
    return 0;
}

struct HarnessContext {
    DatasetOnDisk data;
    LoadedDenoiser den;
    diffusion::NoiseSchedule sched;
    pipeline::TaskPreset preset;
    int k_referred = 1;
    uint64_t seed = 0;
    int workers = 2;
};

std::vector<Tensor> run_restores(const HarnessContext& ctx, int k_referred,
                                 pipeline::AblationVariant variant) {
    const int n = static_cast<int>(ctx.data.degraded.size());
    std::vector<Tensor> outputs(static_cast<size_t>(n));
    parallel_for(n, ctx.workers, [&](int i) {
        pipeline::RestoreOptions opts;
        opts.seed = Rng::mix(ctx.seed, static_cast<uint64_t>(i));
        opts.k_referred = k_referred;
        const Tensor y = pipeline::to_model_range(ctx.data.degraded[static_cast<size_t>(i)]);
        const auto res =
            pipeline::ablate(y, *ctx.den.den, ctx.sched, ctx.preset, variant, opts);
        outputs[static_cast<size_t>(i)] = pipeline::to_unit_range(res.output);
    });
    return outputs;
}

void metric_means(const std::vector<Tensor>& outputs, const std::vector<Tensor>& clean,
                  double& mean_psnr, double& mean_ssim) {
    mean_psnr = 0.0;
    mean_ssim = 0.0;
    for (size_t i = 0; i < outputs.size(); ++i) {
        mean_psnr += metrics::psnr(outputs[i], clean[i]);
        mean_ssim += metrics::ssim(outputs[i], clean[i]);
    }
    mean_psnr /= static_cast<double>(outputs.size());
    mean_ssim /= static_cast<double>(outputs.size());
}

int cmd_benchmark(const HarnessContext& ctx, const std::string& out_dir,
                  bool with_ablation, bool with_sweep, bool save_outputs) {
    fs::create_directories(out_dir);
    const int n = static_cast<int>(ctx.data.degraded.size());

    const std::vector<Tensor> restored =
        run_restores(ctx, ctx.k_referred, pipeline::AblationVariant::TDG);

    std::ostringstream csv;
    csv << "image,noisy_psnr,noisy_ssim,restored_psnr,restored_ssim\n";
    double np = 0, ns = 0, rp = 0, rs = 0;
    for (int i = 0; i < n; ++i) {
        const auto& clean = ctx.data.clean[static_cast<size_t>(i)];
        const double psnr_in = metrics::psnr(ctx.data.degraded[static_cast<size_t>(i)], clean);
        const double ssim_in = metrics::ssim(ctx.data.degraded[static_cast<size_t>(i)], clean);
        const double psnr_out = metrics::psnr(restored[static_cast<size_t>(i)], clean);
        const double ssim_out = metrics::ssim(restored[static_cast<size_t>(i)], clean);
        np += psnr_in;
        ns += ssim_in;
        rp += psnr_out;
        rs += ssim_out;
        csv << pair_name("degraded", i) << "," << io::format_float(psnr_in) << ","
            << io::format_float(ssim_in) << "," << io::format_float(psnr_out) << ","
            << io::format_float(ssim_out) << "\n";
        if (save_outputs)
            io::write_image((fs::path(out_dir) / pair_name("restored", i)).string(),
                            restored[static_cast<size_t>(i)]);
    }
    csv << "mean," << io::format_float(np / n) << "," << io::format_float(ns / n) << ","
        << io::format_float(rp / n) << "," << io::format_float(rs / n) << "\n";
    io::write_text((fs::path(out_dir) / "metrics.csv").string(), csv.str());
    std::cout << "noisy mean psnr " << io::format_float(np / n) << ", restored mean psnr "
              << io::format_float(rp / n) << "\n";

    if (with_ablation) {
        std::ostringstream ab;
        ab << "variant,psnr,ssim\n";
        for (auto v : {pipeline::AblationVariant::UG, pipeline::AblationVariant::MinusFS,
                       pipeline::AblationVariant::MinusSS,
                       pipeline::AblationVariant::MinusTS,
                       pipeline::AblationVariant::TDG}) {
            const auto outs = run_restores(ctx, ctx.k_referred, v);
            double mp = 0, ms = 0;
            metric_means(outs, ctx.data.clean, mp, ms);
            ab << pipeline::variant_name(v) << "," << io::format_float(mp) << ","
               << io::format_float(ms) << "\n";
        }
        io::write_text((fs::path(out_dir) / "ablation.csv").string(), ab.str());
        std::cout << "wrote ablation.csv\n";
    }

    if (with_sweep) {
        std::ostringstream sw;
        sw << "k,psnr,ssim\n";
        for (int k = 0; k <= 4; ++k) {
            const auto outs = run_restores(ctx, k, pipeline::AblationVariant::TDG);
            double mp = 0, ms = 0;
            metric_means(outs, ctx.data.clean, mp, ms);
            sw << k << "," << io::format_float(mp) << "," << io::format_float(ms) << "\n";
        }
        io::write_text((fs::path(out_dir) / "referred_sweep.csv").string(), sw.str());
        std::cout << "wrote referred_sweep.csv\n";
    }
    return 0;
}

int cmd_tdm_viz(const CommonOpts& common, const PresetOpts& preset_opts,
                const std::string& input, const std::string& clean_dir_or_file,
                int steps, const std::string& out_dir) {
    if (!fs::exists(input)) throw BadInput("input image '" + input + "' not found");
    const Tensor y01 = io::read_image(input);
    const Tensor y = pipeline::to_model_range(y01);

    std::vector<Tensor> cleans01;
    if (fs::is_directory(clean_dir_or_file)) {
        for (const auto& e : fs::directory_iterator(clean_dir_or_file))
            if (e.path().extension() == ".ppm")
                cleans01.push_back(io::read_image(e.path().string()));
        std::sort(cleans01.begin(), cleans01.end(),
                  [](const Tensor& a, const Tensor& b) { return a.data < b.data; });
    } else {
        cleans01.push_back(io::read_image(clean_dir_or_file));
    }
    if (cleans01.empty()) throw BadInput("no clean images found");

    std::vector<Tensor> cleans;
    for (const auto& c : cleans01) {
        if (!(c.shape == y01.shape))
            throw BadInput("clean image shape " + c.shape.str() + " != input " +
                           y01.shape.str());
        cleans.push_back(pipeline::to_model_range(c));
    }

    const pipeline::TaskPreset preset = resolve_preset(preset_opts, 1000);
    tdm::Tdm tdm_state(preset.tdm, Rng::mix(common.seed, 0x7D51));
    const nn::FeatureExtractor vfeat;
    const auto trace = tdm::standalone_train(tdm_state, vfeat, cleans, y, steps);

    fs::create_directories(out_dir);
    io::write_image((fs::path(out_dir) / "target_degraded.ppm").string(), y01);
    for (size_t i = 0; i < cleans.size(); ++i) {
        const Tensor phi_out = tdm_state.apply_phi(cleans[i]);
        io::write_image(
            (fs::path(out_dir) / ("clean_" + std::to_string(i) + ".ppm")).string(),
            cleans01[i]);
        io::write_image(
            (fs::path(out_dir) / ("degraded_by_phi_" + std::to_string(i) + ".ppm")).string(),
            pipeline::to_unit_range(phi_out));
    }
    std::cout << "L_phi " << io::format_float(trace.losses.front().phi) << " -> "
              << io::format_float(trace.losses.back().phi) << " over " << steps
              << " steps\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot diffusion-guided image restoration"};
    app.require_subcommand(1);

    // make-data ------------------------------------------------------------
    auto* mk = app.add_subcommand("make-data", "synthesize a paired dataset");
    CommonOpts mk_common;
    add_common(mk, mk_common);
    std::string mk_out = "data", mk_kind = "noise", mk_params = "30";
    std::string mk_source = "shapes32";
    int mk_n = 8, mk_side = 32;
    mk->add_option("--out", mk_out, "output directory");
    mk->add_option("--n", mk_n, "number of pairs");
    mk->add_option("--degradation", mk_kind, "noise|haze|lowlight");
    mk->add_option("--params", mk_params, "degradation parameters, comma separated");
    mk->add_option("--source", mk_source, "'shapes32' or an image directory");
    mk->add_option("--size", mk_side, "crop/resize side for directory sources");

    // train-denoiser ---------------------------------------------------------
    auto* tr = app.add_subcommand("train-denoiser", "train the tiny eps-predictor");
    CommonOpts tr_common;
    ScheduleOpts tr_sched;
    add_common(tr, tr_common);
    add_schedule(tr, tr_sched);
    std::string tr_source = "shapes32", tr_out = "denoiser.gdrb", tr_init, tr_csv;
    int tr_n = 256, tr_side = 32, tr_steps = 3000, tr_batch = 4;
    int tr_base = 32, tr_temb = 64;
    double tr_lr = 1e-3;
    tr->add_option("--source", tr_source, "'shapes32' or an image directory");
    tr->add_option("--n", tr_n, "training images drawn from the source");
    tr->add_option("--size", tr_side, "image side");
    tr->add_option("--steps", tr_steps, "Adam steps");
    tr->add_option("--batch", tr_batch, "batch size");
    tr->add_option("--lr", tr_lr, "learning rate");
    tr->add_option("--base-channels", tr_base, "first level channel count");
    tr->add_option("--temb-dim", tr_temb, "time embedding size");
    tr->add_option("--init", tr_init, "resume from an existing parameter file");
    tr->add_option("--out", tr_out, "output parameter bundle");
    tr->add_option("--loss-csv", tr_csv, "write the loss trace here");

    // restore ----------------------------------------------------------------
    auto* rs = app.add_subcommand("restore", "restore one degraded image");
    CommonOpts rs_common;
    ScheduleOpts rs_sched;
    PresetOpts rs_preset;
    add_common(rs, rs_common);
    add_schedule(rs, rs_sched);
    add_preset(rs, rs_preset);
    std::string rs_input, rs_output = "restored.ppm", rs_den, rs_gt, rs_tel;
    rs->add_option("--input", rs_input, "degraded image (ppm)")->required();
    rs->add_option("--output", rs_output, "restored image path");
    rs->add_option("--denoiser", rs_den, "parameter bundle or gmm:<spec.cfg>");
    rs->add_option("--gt", rs_gt, "ground-truth image for a metric row");
    rs->add_option("--telemetry", rs_tel, "per-timestep log file");

    // benchmark / ablate -------------------------------------------------------
    auto* bm = app.add_subcommand("benchmark", "restore a dataset and tabulate metrics");
    CommonOpts bm_common;
    ScheduleOpts bm_sched;
    PresetOpts bm_preset;
    add_common(bm, bm_common);
    add_schedule(bm, bm_sched);
    add_preset(bm, bm_preset);
    std::string bm_data, bm_den, bm_out = "bench";
    int bm_workers = 2;
    bool bm_ablation = false, bm_sweep = false, bm_save = false;
    bm->add_option("--data", bm_data, "dataset directory from make-data")->required();
    bm->add_option("--denoiser", bm_den, "parameter bundle or gmm:<spec.cfg>");
    bm->add_option("--out", bm_out, "output directory for CSV tables");
    bm->add_option("--workers", bm_workers, "parallel restoration jobs");
    bm->add_flag("--ablation", bm_ablation, "also emit the ablation table");
    bm->add_flag("--sweep", bm_sweep, "also emit the referred-count sweep");
    bm->add_flag("--save-outputs", bm_save, "write restored images");

    auto* ab = app.add_subcommand("ablate", "guidance ablation + referred sweep tables");
    CommonOpts ab_common;
    ScheduleOpts ab_sched;
    PresetOpts ab_preset;
    add_common(ab, ab_common);
    add_schedule(ab, ab_sched);
    add_preset(ab, ab_preset);
    std::string ab_data, ab_den, ab_out = "ablation";
    int ab_workers = 2;
    ab->add_option("--data", ab_data, "dataset directory from make-data")->required();
    ab->add_option("--denoiser", ab_den, "parameter bundle or gmm:<spec.cfg>");
    ab->add_option("--out", ab_out, "output directory for CSV tables");
    ab->add_option("--workers", ab_workers, "parallel restoration jobs");

    // tdm-viz -------------------------------------------------------------------
    auto* tv = app.add_subcommand("tdm-viz",
                                  "standalone TDM training; writes y / clean / phi(clean)");
    CommonOpts tv_common;
    PresetOpts tv_preset;
    add_common(tv, tv_common);
    add_preset(tv, tv_preset);
    std::string tv_input, tv_clean, tv_out = "tdmviz";
    int tv_steps = 200;
    tv->add_option("--input", tv_input, "target degraded image")->required();
    tv->add_option("--clean", tv_clean, "clean image or directory")->required();
    tv->add_option("--steps", tv_steps, "TDM steps");
    tv->add_option("--out", tv_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (mk->parsed()) {
            load_config_into(mk_common, [&](io::KeyValues& kv) {
                mk_out = kv.get_string("out", mk_out);
                mk_n = static_cast<int>(kv.get_int("n", mk_n));
                mk_kind = kv.get_string("degradation", mk_kind);
                mk_params = kv.get_string("params", mk_params);
                mk_source = kv.get_string("source", mk_source);
                mk_side = static_cast<int>(kv.get_int("size", mk_side));
                mk_common.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<int64_t>(mk_common.seed)));
                mk_common.kernels = kv.get_string("kernels", mk_common.kernels);
            });
            apply_kernels(mk_common.kernels);
            return cmd_make_data(mk_common, mk_out, mk_n, mk_kind, mk_params, mk_source,
                                 mk_side);
        }
        if (tr->parsed()) {
            load_config_into(tr_common, [&](io::KeyValues& kv) {
                tr_source = kv.get_string("source", tr_source);
                tr_n = static_cast<int>(kv.get_int("n", tr_n));
                tr_side = static_cast<int>(kv.get_int("size", tr_side));
                tr_steps = static_cast<int>(kv.get_int("steps", tr_steps));
                tr_batch = static_cast<int>(kv.get_int("batch", tr_batch));
                tr_lr = kv.get_double("lr", tr_lr);
                tr_base = static_cast<int>(kv.get_int("base_channels", tr_base));
                tr_temb = static_cast<int>(kv.get_int("temb_dim", tr_temb));
                tr_sched.T = static_cast<int>(kv.get_int("T", tr_sched.T));
                tr_sched.beta_start = kv.get_double("beta_start", tr_sched.beta_start);
                tr_sched.beta_end = kv.get_double("beta_end", tr_sched.beta_end);
                tr_out = kv.get_string("out", tr_out);
                tr_init = kv.get_string("init", tr_init);
                tr_csv = kv.get_string("loss_csv", tr_csv);
                tr_common.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<int64_t>(tr_common.seed)));
                tr_common.kernels = kv.get_string("kernels", tr_common.kernels);
            });
            apply_kernels(tr_common.kernels);
            return cmd_train_denoiser(tr_common, tr_sched, tr_source, tr_n, tr_side,
                                      tr_steps, tr_batch, tr_lr, tr_base, tr_temb,
                                      tr_init, tr_out, tr_csv);
        }
        if (rs->parsed()) {
            apply_kernels(rs_common.kernels);
            return cmd_restore(rs_common, rs_sched, rs_preset, rs_input, rs_output,
                               rs_den, rs_gt, rs_tel);
        }
        if (bm->parsed() || ab->parsed()) {
            const bool is_bm = bm->parsed();
            HarnessContext ctx;
            const CommonOpts& common = is_bm ? bm_common : ab_common;
            apply_kernels(common.kernels);
            ctx.data = read_dataset_dir(is_bm ? bm_data : ab_data);
            ctx.den = load_denoiser(is_bm ? bm_den : ab_den, is_bm ? bm_sched : ab_sched);
            ctx.sched = diffusion::build_linear_schedule(
                ctx.den.sched.T, ctx.den.sched.beta_start, ctx.den.sched.beta_end);
            const PresetOpts& po = is_bm ? bm_preset : ab_preset;
            ctx.preset = resolve_preset(po, ctx.sched.T);
            ctx.k_referred = po.k_referred;
            ctx.seed = common.seed;
            ctx.workers = is_bm ? bm_workers : ab_workers;
            if (is_bm) return cmd_benchmark(ctx, bm_out, bm_ablation, bm_sweep, bm_save);
            fs::create_directories(ab_out);
            // ablate: only the ablation and sweep tables.
            std::ostringstream ab_csv;
            ab_csv << "variant,psnr,ssim\n";
            for (auto v : {pipeline::AblationVariant::UG, pipeline::AblationVariant::MinusFS,
                           pipeline::AblationVariant::MinusSS,
                           pipeline::AblationVariant::MinusTS,
                           pipeline::AblationVariant::TDG}) {
                const auto outs = run_restores(ctx, ctx.k_referred, v);
                double mp = 0, ms = 0;
                metric_means(outs, ctx.data.clean, mp, ms);
                ab_csv << pipeline::variant_name(v) << "," << io::format_float(mp) << ","
                       << io::format_float(ms) << "\n";
            }
            io::write_text((fs::path(ab_out) / "ablation.csv").string(), ab_csv.str());
            std::ostringstream sw;
            sw << "k,psnr,ssim\n";
            for (int k = 0; k <= 4; ++k) {
                const auto outs = run_restores(ctx, k, pipeline::AblationVariant::TDG);
                double mp = 0, ms = 0;
                metric_means(outs, ctx.data.clean, mp, ms);
                sw << k << "," << io::format_float(mp) << "," << io::format_float(ms)
                   << "\n";
            }
            io::write_text((fs::path(ab_out) / "referred_sweep.csv").string(), sw.str());
            std::cout << "wrote " << ab_out << "/ablation.csv and referred_sweep.csv\n";
            return 0;
        }
        if (tv->parsed()) {
            apply_kernels(tv_common.kernels);
            return cmd_tdm_viz(tv_common, tv_preset, tv_input, tv_clean, tv_steps, tv_out);
        }
    } catch (const BadInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const io::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
