// Command-line front end: synthetic data generation, coefficient learning,
// artifact removal, evaluation, and filter export.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "osc/ct_sim.hpp"
#include "osc/dict_learn.hpp"
#include "osc/metrics.hpp"
#include "osc/osc_model.hpp"
#include "osc/parallel.hpp"
#include "osc/png.hpp"
#include "osc/prox_solver.hpp"
#include "osc/tensor_io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadArgs = 2;
constexpr int kExitMissingData = 3;

struct MissingData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw MissingData("missing input: " + path);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_run_config(const fs::path& dir, const std::map<std::string, std::string>& kv) {
    fs::create_directories(dir);
    std::ofstream f(dir / "run.config");
    for (const auto& [k, v] : kv) f << k << '=' << v << '\n';
}

std::string sample_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", i);
    return buf;
}

std::size_t auto_detector_count(std::size_t size) {
    std::size_t n = static_cast<std::size_t>(
                        std::ceil(std::numbers::sqrt2 * static_cast<double>(size))) +
                    3;
    if (n % 2 == 0) ++n;
    return n;
}

int run_generate(std::size_t n, std::uint64_t seed, std::size_t size, std::size_t views,
                 std::size_t dets, double severity, const std::string& out, bool png) {
    osc::Geometry geom;
    geom.image_size = size;
    geom.n_views = views;
    geom.n_det = dets == 0 ? auto_detector_count(size) : dets;
    osc::check_geometry(geom);

    fs::create_directories(out);
    std::ofstream manifest(fs::path(out) / "manifest.csv");
    manifest << "id,seed,severity,metal_pixels\n";
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t sample_seed = seed + i;
        const osc::PairSample pair = osc::make_pair(sample_seed, geom, severity);
        const std::string id = sample_id(i);
        const fs::path dir = fs::path(out) / id;
        fs::create_directories(dir);
        osc::write_osct((dir / "y.osct").string(), pair.Y);
        osc::write_osct((dir / "x.osct").string(), pair.X);
        osc::write_osct((dir / "i.osct").string(), pair.I);
        osc::write_osct((dir / "metal.osct").string(), pair.metal_mask);
        if (png) {
            osc::write_png_normalized((dir / "y.png").string(), pair.Y);
            osc::write_png_normalized((dir / "x.png").string(), pair.X);
        }
        std::size_t metal_pixels = 0;
        for (double v : pair.metal_mask.data) metal_pixels += v != 0.0;
        manifest << id << ',' << sample_seed << ',' << fmt_double(severity) << ','
                 << metal_pixels << '\n';
    }
    write_run_config(out, {{"command", "generate"},
                           {"n", std::to_string(n)},
                           {"seed", std::to_string(seed)},
                           {"size", std::to_string(size)},
                           {"views", std::to_string(views)},
                           {"dets", std::to_string(geom.n_det)},
                           {"severity", fmt_double(severity)},
                           {"png", png ? "1" : "0"},
                           {"out", out},
                           {"threads", std::to_string(osc::thread_count())}});
    return kExitOk;
}

std::vector<osc::TrainSample> load_dataset(const std::string& dir) {
    std::vector<std::string> ids;
    if (!fs::exists(dir)) throw MissingData("missing data directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory() && fs::exists(entry.path() / "y.osct"))
            ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw MissingData("no samples under " + dir);
    std::vector<osc::TrainSample> dataset;
    dataset.reserve(ids.size());
    for (const std::string& id : ids) {
        const fs::path p = fs::path(dir) / id;
        dataset.push_back(osc::make_train_sample(osc::read_osct((p / "y.osct").string()),
                                                 osc::read_osct((p / "x.osct").string()),
                                                 osc::read_osct((p / "i.osct").string())));
    }
    return dataset;
}

int run_learn(const std::string& data, const std::string& out, std::size_t L, std::size_t K,
              std::size_t p, double h, const osc::TrainConfig& config, bool dc_free) {
    const auto dataset = load_dataset(data);
    osc::OSCDictionary init = osc::make_dictionary(
        osc::random_coefficients(p, K, h, config.seed), L, osc::BasisVariant::AliasFree);
    if (config.norm_constraint) {
        osc::CoefficientSet c = init.coeffs;
        osc::normalize_coefficients(c, init.variant);
        init = osc::with_coefficients(init, std::move(c));
    }
    osc::TrainResult result = osc::train(dataset, init, config);
    if (dc_free) {
        osc::CoefficientSet c = result.dict.coeffs;
        osc::remove_dc_component(c, result.dict.variant);
        osc::normalize_coefficients(c, result.dict.variant);
        result.dict = osc::with_coefficients(result.dict, std::move(c));
    }

    const fs::path out_path(out);
    const fs::path out_dir = out_path.parent_path().empty() ? "." : out_path.parent_path();
    fs::create_directories(out_dir);
    osc::save_dictionary(result.dict, out);
    std::ofstream loss(out_dir / "loss.csv");
    loss << "epoch,loss\n";
    for (std::size_t e = 0; e < result.loss_curve.size(); ++e)
        loss << e << ',' << fmt_double(result.loss_curve[e]) << '\n';
    write_run_config(out_dir, {{"command", "learn"},
                               {"data", data},
                               {"out", out},
                               {"L", std::to_string(L)},
                               {"K", std::to_string(K)},
                               {"p", std::to_string(p)},
                               {"h", fmt_double(h)},
                               {"epochs", std::to_string(config.epochs)},
                               {"lr", fmt_double(config.lr)},
                               {"alpha", fmt_double(config.alpha)},
                               {"inner_iters", std::to_string(config.inner_iters)},
                               {"lambda1", fmt_double(config.lambda1)},
                               {"norm_constraint", config.norm_constraint ? "1" : "0"},
                               {"dc_free", dc_free ? "1" : "0"},
                               {"seed", std::to_string(config.seed)},
                               {"threads", std::to_string(osc::thread_count())}});
    return kExitOk;
}

int run_remove(const std::string& input, const std::string& mask, const std::string& dict_path,
               const std::string& out_x, const std::string& out_a, const std::string& history,
               osc::SolverConfig config) {
    require_file(input);
    require_file(mask);
    require_file(dict_path);
    const osc::Tensor Y = osc::read_osct(input);
    const osc::Tensor I = osc::read_osct(mask);
    const osc::OSCDictionary dict = osc::load_dictionary(dict_path);
    config.record_history = !history.empty();
    const osc::SolveResult result = osc::solve(Y, I, dict, config);

    const fs::path out_dir =
        fs::path(out_x).parent_path().empty() ? "." : fs::path(out_x).parent_path();
    fs::create_directories(out_dir);
    osc::write_osct(out_x, result.X);
    if (!out_a.empty()) {
        fs::create_directories(fs::path(out_a).parent_path().empty()
                                   ? "."
                                   : fs::path(out_a).parent_path());
        osc::write_osct(out_a, result.A);
    }
    if (!history.empty()) {
        std::ofstream f(history);
        f << "iter,objective\n";
        for (std::size_t i = 0; i < result.history.size(); ++i)
            f << i << ',' << fmt_double(result.history[i]) << '\n';
    }
    write_run_config(out_dir,
                     {{"command", "remove"},
                      {"input", input},
                      {"mask", mask},
                      {"dict", dict_path},
                      {"alpha", fmt_double(config.alpha)},
                      {"iters", std::to_string(config.iterations)},
                      {"eta1", config.eta1 ? fmt_double(*config.eta1) : "auto"},
                      {"eta2", config.eta2 ? fmt_double(*config.eta2) : "auto"},
                      {"x_init", config.x_init == osc::XInit::Zero ? "zero" : "yclone"},
                      {"out_x", out_x},
                      {"out_a", out_a},
                      {"history", history},
                      {"threads", std::to_string(osc::thread_count())}});
    return kExitOk;
}

int run_eval(const std::string& data, const std::string& results, std::string out) {
    if (!fs::exists(data)) throw MissingData("missing data directory: " + data);
    if (!fs::exists(results)) throw MissingData("missing results directory: " + results);
    const osc::EvalReport report = osc::evaluate(data, results);
    if (out.empty()) out = (fs::path(results) / "report.csv").string();
    const fs::path out_dir =
        fs::path(out).parent_path().empty() ? "." : fs::path(out).parent_path();
    fs::create_directories(out_dir);
    osc::write_report_csv(report, out);
    write_run_config(out_dir, {{"command", "eval"},
                               {"data", data},
                               {"results", results},
                               {"out", out},
                               {"threads", std::to_string(osc::thread_count())}});
    if (report.rows.empty()) throw MissingData("no samples found under " + data);
    if (report.any_missing) {
        std::fprintf(stderr, "eval: missing result samples (see %s)\n", out.c_str());
        return kExitMissingData;
    }
    return kExitOk;
}

int run_export_filters(const std::string& dict_path, const std::string& out) {
    require_file(dict_path);
    const osc::OSCDictionary dict = osc::load_dictionary(dict_path);
    fs::create_directories(out);
    for (std::size_t l = 0; l < dict.L; ++l) {
        for (std::size_t k = 0; k < dict.K(); ++k) {
            const osc::Tensor& f = dict.bank[l * dict.K() + k];
            char name[64];
            std::snprintf(name, sizeof(name), "filter_k%zu_l%zu", k + 1, l + 1);
            osc::write_osct((fs::path(out) / (std::string(name) + ".osct")).string(), f);
            osc::write_png_normalized((fs::path(out) / (std::string(name) + ".png")).string(),
                                      f);
        }
    }
    write_run_config(out, {{"command", "export-filters"},
                           {"dict", dict_path},
                           {"out", out},
                           {"threads", std::to_string(osc::thread_count())}});
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"orientation-shared convolutional sparse coding for CT metal artifact removal"};
    app.require_subcommand(1);

    int threads = 0;
    std::uint64_t seed = 42;
    app.add_option("--threads", threads, "worker thread count (default: hardware)");
    app.add_option("--seed", seed, "base RNG seed");

    auto* gen = app.add_subcommand("generate", "synthesize paired CT samples");
    gen->fallthrough();
    std::size_t gen_n = 20, gen_size = 128, gen_views = 180, gen_dets = 0;
    double gen_severity = 0.5;
    std::string gen_out;
    bool gen_png = false;
    gen->add_option("--n", gen_n, "number of samples");
    gen->add_option("--size", gen_size, "image size (H = W)");
    gen->add_option("--views", gen_views, "projection views over 360 degrees");
    gen->add_option("--dets", gen_dets, "detector count (0 = auto)");
    gen->add_option("--severity", gen_severity, "corruption severity");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_flag("--png", gen_png, "also write normalized previews");

    auto* learn = app.add_subcommand("learn", "learn shared filter coefficients");
    learn->fallthrough();
    learn->set_help_flag("--help", "print help"); // frees -h for the mesh size
    std::string learn_data, learn_out;
    std::size_t learn_L = 8, learn_K = 4, learn_p = 9;
    double learn_h = 0.25;
    osc::TrainConfig train_config;
    bool no_norm = false, dc_free = false;
    learn->add_option("--data", learn_data, "training sample directory")->required();
    learn->add_option("--out", learn_out, "output dictionary meta path")->required();
    learn->add_option("--L", learn_L, "rotation angle count");
    learn->add_option("--K", learn_K, "filters per angle");
    learn->add_option("--p", learn_p, "filter size");
    learn->add_option("--h", learn_h, "mesh size");
    learn->add_option("--epochs", train_config.epochs, "training epochs");
    learn->add_option("--lr", train_config.lr, "coefficient learning rate");
    learn->add_option("--alpha", train_config.alpha, "sparse-coding L1 weight");
    learn->add_option("--inner-iters", train_config.inner_iters, "ISTA iterations per sample");
    learn->add_option("--lambda1", train_config.lambda1, "masked L1 loss weight");
    learn->add_flag("--no-norm-constraint", no_norm, "disable per-filter norm constraint");
    learn->add_flag("--dc-free", dc_free,
                    "project filters to zero mean and renormalize after training");

    auto* rem = app.add_subcommand("remove", "separate artifacts from a CT image");
    rem->fallthrough();
    std::string rem_input, rem_mask, rem_dict, rem_out_x, rem_out_a, rem_history;
    double rem_alpha = 0.05, rem_eta1 = 0.0, rem_eta2 = 0.3;
    int rem_iters = 40;
    std::string rem_x_init = "zero";
    rem->add_option("--input", rem_input, "metal-affected image (OSCT)")->required();
    rem->add_option("--mask", rem_mask, "binary non-metal mask (OSCT)")->required();
    rem->add_option("--dict", rem_dict, "dictionary meta path")->required();
    rem->add_option("--alpha", rem_alpha, "feature-map L1 weight");
    rem->add_option("--iters", rem_iters, "solver iterations");
    rem->add_option("--eta1", rem_eta1, "feature-map step (0 = auto)");
    rem->add_option("--eta2", rem_eta2, "image step (0 = auto)");
    rem->add_option("--x-init", rem_x_init, "x initialization: zero | yclone");
    rem->add_option("--out-x", rem_out_x, "output clean image path")->required();
    rem->add_option("--out-a", rem_out_a, "output artifact layer path");
    rem->add_option("--history", rem_history, "objective history CSV path");

    auto* eval = app.add_subcommand("eval", "score results against references");
    eval->fallthrough();
    std::string eval_data, eval_results, eval_out;
    eval->add_option("--data", eval_data, "reference sample directory")->required();
    eval->add_option("--results", eval_results, "method output directory")->required();
    eval->add_option("--out", eval_out, "report path (default results/report.csv)");

    auto* exp = app.add_subcommand("export-filters", "write the assembled filter bank");
    exp->fallthrough();
    std::string exp_dict, exp_out;
    exp->add_option("--dict", exp_dict, "dictionary meta path")->required();
    exp->add_option("--out", exp_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitBadArgs;
    }

    if (threads > 0) osc::set_thread_count(threads);

    try {
        if (*gen)
            return run_generate(gen_n, seed, gen_size, gen_views, gen_dets, gen_severity,
                                gen_out, gen_png);
        if (*learn) {
            train_config.seed = seed;
            train_config.norm_constraint = !no_norm;
            return run_learn(learn_data, learn_out, learn_L, learn_K, learn_p, learn_h,
                             train_config, dc_free);
        }
        if (*rem) {
            osc::SolverConfig config;
            config.alpha = rem_alpha;
            config.iterations = rem_iters;
            if (rem_eta1 > 0.0) config.eta1 = rem_eta1;
            if (rem_eta2 > 0.0) config.eta2 = rem_eta2;
            if (rem_x_init == "zero") config.x_init = osc::XInit::Zero;
            else if (rem_x_init == "yclone") config.x_init = osc::XInit::YClone;
            else throw std::invalid_argument("remove: --x-init must be zero or yclone");
            return run_remove(rem_input, rem_mask, rem_dict, rem_out_x, rem_out_a,
                              rem_history, config);
        }
        if (*eval) return run_eval(eval_data, eval_results, eval_out);
        if (*exp) return run_export_filters(exp_dict, exp_out);
    } catch (const MissingData& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitMissingData;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitBadArgs;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kExitOk;
}
