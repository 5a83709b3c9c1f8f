#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvlab/io.hpp"
#include "tvlab/metrics.hpp"
#include "tvlab/outer.hpp"
#include "tvlab/rof.hpp"
#include "tvlab/rsnet.hpp"
#include "tvlab/ultrasound.hpp"

namespace tvlab {

inline constexpr const char* kCodeVersion = "1.0.0";

/// Everything needed to run one experiment; every field is recorded in the
/// run manifest so the run can be repeated bit-identically.
struct ExperimentSpec {
    std::string task;                 // smooth|denoise|reconstruct|train|bench|compare
    std::vector<std::string> inputs;  // image files; empty -> synthetic corpus
    std::string output_dir;
    std::string params_path;          // network parameters (load for compare, save for train)
    uint64_t seed = 1;

    // Synthetic corpus (used when inputs is empty).
    int synthetic_count = 5;
    int synthetic_size = 32;
    int synthetic_regions = 6;

    SolverConfig solver;       // lambda here is the raw iteration weight for
                               // smooth/denoise/bench/compare tasks
    int iterations = 200;      // solver iterations for those tasks
    double noise_sigma = 15.0; // denoise noise level ([0,255] scale)

    // Network (train/compare).
    TrainConfig train;
    int net_blocks = 3;
    int net_channels = 8;
    int patch_size = 32;
    int patch_count = 200;

    // Ultrasound reconstruction.
    int phantom_size = 16;
    int phantom_regions = 4;
    double delay_noise_sigma = 0.0; // seconds
};

/// Piecewise-constant test image: Voronoi regions with values in [0,255].
inline Image generate_piecewise_constant(int height, int width, int regions, uint64_t seed) {
    return generate_voronoi_phantom(height, width, regions, 0.0, 255.0, seed).display;
}

namespace detail {

namespace fs = std::filesystem;

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Tracks written artifacts so a failed run leaves no partial output.
class ArtifactWriter {
public:
    explicit ArtifactWriter(const std::string& dir) : dir_(dir) {
        fs::create_directories(dir_);
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string image(const Image& img, const std::string& name) {
        const std::string p = path(name);
        save_image(img, p);
        written_.push_back(p);
        return p;
    }

    std::string csv(const std::string& name, const std::string& header,
                    const std::vector<std::string>& rows) {
        const std::string p = path(name);
        std::ofstream os(p);
        if (!os) throw std::runtime_error("cannot write " + p);
        os << header << "\n";
        for (const std::string& row : rows) os << row << "\n";
        if (!os) throw std::runtime_error("write failure on " + p);
        written_.push_back(p);
        return p;
    }

    std::string json(const std::string& name, const nlohmann::json& doc) {
        const std::string p = path(name);
        std::ofstream os(p);
        if (!os) throw std::runtime_error("cannot write " + p);
        os << doc.dump(2) << "\n";
        if (!os) throw std::runtime_error("write failure on " + p);
        written_.push_back(p);
        return p;
    }

    void note(const std::string& p) { written_.push_back(p); }

    void remove_all() {
        for (const std::string& p : written_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }

private:
    fs::path dir_;
    std::vector<std::string> written_;
};

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline nlohmann::json spec_manifest(const ExperimentSpec& spec) {
    nlohmann::json j;
    j["code_version"] = kCodeVersion;
    j["task"] = spec.task;
    j["inputs"] = spec.inputs;
    j["seed"] = spec.seed;
    j["synthetic"] = {{"count", spec.synthetic_count},
                      {"size", spec.synthetic_size},
                      {"regions", spec.synthetic_regions}};
    j["solver"] = {{"lambda", spec.solver.lambda},     {"beta", spec.solver.beta},
                   {"alpha", spec.solver.alpha},       {"weight_x", spec.solver.weight_x},
                   {"weight_y", spec.solver.weight_y}, {"inner_iters", spec.solver.inner_iters},
                   {"outer_iters", spec.solver.outer_iters}};
    j["iterations"] = spec.iterations;
    j["noise_sigma"] = spec.noise_sigma;
    j["train"] = {{"learning_rate", spec.train.learning_rate},
                  {"batch_size", spec.train.batch_size},
                  {"epochs", spec.train.epochs},
                  {"lambda", spec.train.lambda},
                  {"weight_x", spec.train.weight_x},
                  {"seed", spec.train.seed}};
    j["network"] = {{"blocks", spec.net_blocks},
                    {"channels", spec.net_channels},
                    {"patch_size", spec.patch_size},
                    {"patch_count", spec.patch_count}};
    j["ultrasound"] = {{"phantom_size", spec.phantom_size},
                       {"phantom_regions", spec.phantom_regions},
                       {"delay_noise_sigma", spec.delay_noise_sigma}};
    j["params_path"] = spec.params_path;
    return j;
}

inline std::vector<Image> load_corpus(const ExperimentSpec& spec) {
    std::vector<Image> corpus;
    if (!spec.inputs.empty()) {
        for (const std::string& p : spec.inputs) corpus.push_back(to_grayscale(load_image(p)));
    } else {
        for (int i = 0; i < spec.synthetic_count; ++i)
            corpus.push_back(generate_piecewise_constant(
                spec.synthetic_size, spec.synthetic_size, spec.synthetic_regions,
                spec.seed + static_cast<uint64_t>(i)));
    }
    return corpus;
}

inline std::vector<std::string> energy_rows(const std::vector<double>& trace, size_t pixels) {
    std::vector<std::string> rows;
    rows.reserve(trace.size());
    for (size_t i = 0; i < trace.size(); ++i)
        rows.push_back(std::to_string(i) + "," + fmt(trace[i] / static_cast<double>(pixels)));
    return rows;
}

constexpr const char* kMetricHeader =
    "image_id,psnr,ssim,energy_fs,energy_rs,energy_rsnet,runtime_fs,runtime_rs";
constexpr const char* kEnergyHeader = "iteration,normalized_energy";
constexpr const char* kDelayHeader = "ray_index,delay_seconds";

struct SolverRun {
    Image u;
    double runtime = 0.0; // seconds, solver only (no I/O, no trace)
    double energy = 0.0;  // normalized rof energy of the output
};

inline SolverRun timed_rof(const Image& v, const SolverConfig& cfg, int iters, InnerSolver which) {
    SolverRun run;
    const auto t0 = std::chrono::steady_clock::now();
    const RofResult r = (which == InnerSolver::Fast) ? fast_solver(v, cfg, iters)
                                                     : residual_solver(v, cfg, iters);
    run.runtime = seconds_since(t0);
    run.u = r.u;
    run.energy = rof_energy(r.u, v, cfg) / static_cast<double>(v.pixels());
    return run;
}

inline std::string metric_row(int id, double psnr_v, double ssim_v, double e_fs, double e_rs,
                              double e_net, double rt_fs, double rt_rs) {
    std::ostringstream os;
    os << id << "," << fmt(psnr_v) << "," << fmt(ssim_v) << "," << fmt(e_fs) << "," << fmt(e_rs)
       << "," << fmt(e_net) << "," << fmt(rt_fs) << "," << fmt(rt_rs);
    return os.str();
}

} // namespace detail

struct ExperimentResult {
    std::string output_dir;
    std::string manifest_path;
    nlohmann::json summary; // task-specific headline numbers (also in the manifest)
};

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
    if (spec.output_dir.empty())
        throw std::invalid_argument("run_experiment: output_dir is required");
    detail::ArtifactWriter out(spec.output_dir);
    ExperimentResult result;
    result.output_dir = spec.output_dir;
    nlohmann::json manifest = detail::spec_manifest(spec);

    try {
        if (spec.task == "smooth") {
            const std::vector<Image> corpus = detail::load_corpus(spec);
            const SolverConfig cfg =
                raw_rof_config(spec.solver.lambda, spec.solver.beta, spec.solver.weight_x);
            for (size_t i = 0; i < corpus.size(); ++i) {
                const std::string tag = std::to_string(i);
                const RofResult fs = fast_solver(corpus[i], cfg, spec.iterations, true);
                const RofResult rs = residual_solver(corpus[i], cfg, spec.iterations, true);
                out.image(fs.u, "smooth_fs_" + tag + ".png");
                out.image(rs.u, "smooth_rs_" + tag + ".png");
                out.csv("energy_fs_" + tag + ".csv", detail::kEnergyHeader,
                        detail::energy_rows(fs.energy_trace, corpus[i].pixels()));
                out.csv("energy_rs_" + tag + ".csv", detail::kEnergyHeader,
                        detail::energy_rows(rs.energy_trace, corpus[i].pixels()));
            }
            result.summary["images"] = corpus.size();
        } else if (spec.task == "denoise") {
            const std::vector<Image> corpus = detail::load_corpus(spec);
            const SolverConfig cfg =
                raw_rof_config(spec.solver.lambda, spec.solver.beta, spec.solver.weight_x);
            std::vector<std::string> rows;
            double psnr_gain = 0.0;
            for (size_t i = 0; i < corpus.size(); ++i) {
                const std::string tag = std::to_string(i);
                const Image noisy = add_gaussian_noise(corpus[i], spec.noise_sigma,
                                                       spec.seed + 1000 + i);
                // Solvers run on the unit scale; thresholds are calibrated
                // against gradients of order 1.
                Image scaled = noisy;
                for (double& v : scaled.values()) v /= 255.0;
                const detail::SolverRun fs =
                    detail::timed_rof(scaled, cfg, spec.iterations, InnerSolver::Fast);
                const detail::SolverRun rs =
                    detail::timed_rof(scaled, cfg, spec.iterations, InnerSolver::Residual);
                Image fs_u = fs.u, rs_u = rs.u;
                for (double& v : fs_u.values()) v *= 255.0;
                for (double& v : rs_u.values()) v *= 255.0;
                out.image(noisy, "noisy_" + tag + ".png");
                out.image(rs_u, "denoised_rs_" + tag + ".png");
                out.image(fs_u, "denoised_fs_" + tag + ".png");
                const double p = psnr(rs_u, corpus[i]);
                const double s = ssim(rs_u, corpus[i]);
                psnr_gain += p - psnr(noisy, corpus[i]);
                rows.push_back(detail::metric_row(static_cast<int>(i), p, s, fs.energy, rs.energy,
                                                  std::numeric_limits<double>::quiet_NaN(),
                                                  fs.runtime, rs.runtime));
            }
            out.csv("metrics.csv", detail::kMetricHeader, rows);
            result.summary["mean_psnr_gain_db"] = psnr_gain / corpus.size();
        } else if (spec.task == "compare") {
            const std::vector<Image> corpus = detail::load_corpus(spec);
            const SolverConfig cfg =
                raw_rof_config(spec.solver.lambda, spec.solver.beta, spec.solver.weight_x);
            RsnetParams params;
            if (!spec.params_path.empty()) {
                params = load_params(spec.params_path);
            } else {
                params = kernels_from_rs(spec.solver.lambda, spec.solver.beta, spec.iterations);
            }
            std::vector<std::string> rows;
            for (size_t i = 0; i < corpus.size(); ++i) {
                const detail::SolverRun fs =
                    detail::timed_rof(corpus[i], cfg, spec.iterations, InnerSolver::Fast);
                const detail::SolverRun rs =
                    detail::timed_rof(corpus[i], cfg, spec.iterations, InnerSolver::Residual);
                const Image net_u = rsnet_forward(corpus[i], params).u;
                const double e_net =
                    rof_energy(net_u, corpus[i], cfg) / static_cast<double>(corpus[i].pixels());
                out.image(fs.u, "compare_fs_" + std::to_string(i) + ".png");
                out.image(rs.u, "compare_rs_" + std::to_string(i) + ".png");
                out.image(net_u, "compare_rsnet_" + std::to_string(i) + ".png");
                rows.push_back(detail::metric_row(static_cast<int>(i), psnr(rs.u, fs.u),
                                                  ssim(rs.u, fs.u), fs.energy, rs.energy, e_net,
                                                  fs.runtime, rs.runtime));
            }
            out.csv("metrics.csv", detail::kMetricHeader, rows);
            result.summary["images"] = corpus.size();
        } else if (spec.task == "bench") {
            const std::vector<Image> corpus = detail::load_corpus(spec);
            const SolverConfig cfg =
                raw_rof_config(spec.solver.lambda, spec.solver.beta, spec.solver.weight_x);
            double t_fs = 0.0, t_rs = 0.0;
            for (const Image& v : corpus) {
                t_fs += detail::timed_rof(v, cfg, spec.iterations, InnerSolver::Fast).runtime;
                t_rs += detail::timed_rof(v, cfg, spec.iterations, InnerSolver::Residual).runtime;
            }
            const double mean_fs = t_fs / corpus.size(), mean_rs = t_rs / corpus.size();
            out.csv("bench.csv", "solver,mean_runtime_seconds,iterations",
                    {"fast_solver," + detail::fmt(mean_fs) + "," + std::to_string(spec.iterations),
                     "residual_solver," + detail::fmt(mean_rs) + "," +
                         std::to_string(spec.iterations)});
            result.summary["mean_runtime_fs"] = mean_fs;
            result.summary["mean_runtime_rs"] = mean_rs;
        } else if (spec.task == "train") {
            std::vector<Image> sources;
            if (!spec.inputs.empty()) {
                for (const std::string& p : spec.inputs) sources.push_back(to_grayscale(load_image(p)));
            } else {
                for (int i = 0; i < spec.synthetic_count; ++i)
                    sources.push_back(generate_piecewise_constant(
                        2 * spec.patch_size, 2 * spec.patch_size, spec.synthetic_regions,
                        spec.seed + static_cast<uint64_t>(i)));
            }
            const PatchSet patches =
                crop_patches(sources, spec.patch_size, spec.patch_count, spec.seed + 7000);
            const IdentityOperator ident(spec.patch_size, spec.patch_size);
            const RsnetParams p0 = init_params(spec.net_blocks, spec.net_channels,
                                               spec.solver.beta, spec.seed + 9000);
            const TrainResult trained = train_rsnet(patches.train, p0, ident, spec.train);
            const std::string params_path =
                spec.params_path.empty() ? out.path("rsnet_params.bin") : spec.params_path;
            save_params(trained.params, params_path);
            out.note(params_path);
            std::vector<std::string> rows;
            for (size_t e = 0; e < trained.epoch_loss.size(); ++e)
                rows.push_back(std::to_string(e) + "," + detail::fmt(trained.epoch_loss[e]));
            out.csv("train_loss.csv", "epoch,mean_loss", rows);
            const double val_loss = patches.validation.empty()
                                        ? std::numeric_limits<double>::quiet_NaN()
                                        : evaluate_rsnet(patches.validation, trained.params, ident,
                                                         spec.train.loss_config());
            result.summary["final_train_loss"] = trained.epoch_loss.back();
            result.summary["validation_loss"] = val_loss;
            result.summary["params_path"] = params_path;
        } else if (spec.task == "reconstruct") {
            const Phantom phantom =
                generate_voronoi_phantom(spec.phantom_size, spec.phantom_size,
                                         spec.phantom_regions, 0.0, 255.0, spec.seed);
            const RayGeometry geom = make_ray_geometry(spec.phantom_size, spec.phantom_size,
                                                       spec.phantom_size, spec.phantom_size);
            const auto A = build_ray_operator(geom);
            const std::vector<double> f =
                simulate_delays(phantom, *A, spec.delay_noise_sigma, spec.seed + 500);

            std::vector<std::string> delay_rows;
            for (size_t i = 0; i < f.size(); ++i)
                delay_rows.push_back(std::to_string(i) + "," + detail::fmt(f[i]));
            out.csv("delays.csv", detail::kDelayHeader, delay_rows);
            nlohmann::json geometry;
            geometry["grid_height"] = geom.grid_height;
            geometry["grid_width"] = geom.grid_width;
            geometry["cell_size_m"] = geom.cell_size;
            geometry["emitter_x_m"] = geom.emitter_x;
            geometry["receiver_x_m"] = geom.receiver_x;
            out.json("geometry.json", geometry);

            const SolverConfig cfg = spec.solver; // lambda is the scaled TV weight here
            const SosReconstruction rec_fs = reconstruct_sos(f, *A, cfg, InnerSolver::Fast);
            const SosReconstruction rec_rs = reconstruct_sos(f, *A, cfg, InnerSolver::Residual);
            out.image(phantom.display, "phantom.png");
            out.image(rec_fs.display, "reconstruction_fs.png");
            out.image(rec_rs.display, "reconstruction_rs.png");

            const Image truth_c = central_region(phantom.display);
            const MetricReport m_fs = compare_images(central_region(rec_fs.display), truth_c);
            const MetricReport m_rs = compare_images(central_region(rec_rs.display), truth_c);
            out.csv("metrics.csv", "solver,psnr,ssim",
                    {"fast_solver," + detail::fmt(m_fs.psnr) + "," + detail::fmt(m_fs.ssim),
                     "residual_solver," + detail::fmt(m_rs.psnr) + "," + detail::fmt(m_rs.ssim)});
            result.summary["psnr_fs"] = m_fs.psnr;
            result.summary["psnr_rs"] = m_rs.psnr;
            result.summary["ssim_fs"] = m_fs.ssim;
            result.summary["ssim_rs"] = m_rs.ssim;
        } else {
            throw std::invalid_argument("run_experiment: unknown task '" + spec.task + "'");
        }

        manifest["summary"] = result.summary;
        result.manifest_path = out.json("manifest.json", manifest);
    } catch (...) {
        out.remove_all();
        throw;
    }
    return result;
}

} // namespace tvlab
