#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <ggmsel/ggmsel.hpp>

namespace ggmsel::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::shared_ptr<spdlog::logger> logger()
{
    static std::once_flag once;
    static std::shared_ptr<spdlog::logger> log;
    std::call_once(once, [] {
        log = spdlog::stderr_logger_mt("ggm-select");
        log->set_pattern("[%l] %v");
        const char* env = std::getenv("GGM_SELECT_LOG");
        const std::string level = env ? env : "error";
        if (level == "debug") {
            log->set_level(spdlog::level::debug);
        } else if (level == "info") {
            log->set_level(spdlog::level::info);
        } else {
            log->set_level(spdlog::level::err);
        }
    });
    return log;
}

std::string sha256_hex(const std::string& data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("sha256 digest failed");
    }
    std::ostringstream ss;
    for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return ss.str();
}

std::string utc_now()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Config snapshot, seed, version, input digests and timestamps of one run.
class RunManifest
{
public:
    RunManifest(std::string command, json config, std::optional<std::uint64_t> seed)
        : command_(std::move(command)), config_(std::move(config)), seed_(seed), started_(utc_now())
    {}

    void set_config(json config) { config_ = std::move(config); }

    void add_input(const fs::path& path)
    {
        if (fs::is_directory(path)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(path)) {
                if (e.is_regular_file()) files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            for (const auto& f : files) add_input(f);
            return;
        }
        inputs_.push_back({{"path", path.string()}, {"sha256", sha256_hex(io::read_text(path))}});
    }

    void write(const fs::path& path) const
    {
        json j = {
            {"tool", "ggm-select"},
            {"version", tool_version},
            {"command", command_},
            {"config", config_},
            {"seed", seed_ ? json(*seed_) : json(nullptr)},
            {"inputs", inputs_},
            {"started_at", started_},
            {"finished_at", utc_now()},
        };
        io::write_text(path, j.dump(2) + "\n");
    }

private:
    std::string command_;
    json config_;
    std::optional<std::uint64_t> seed_;
    std::string started_;
    json inputs_ = json::array();
};

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

SurrogateSpec surrogate_from_flags(const std::string& kind, const std::vector<std::string>& params)
{
    SurrogateSpec::param_map_t map;
    for (const auto& kv : params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InputError("--param expects key=value, got '" + kv + "'");
        double v = 0.0;
        const auto text = kv.substr(eq + 1);
        auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
            throw InputError("--param value '" + text + "' is not a number");
        }
        map[kv.substr(0, eq)] = v;
    }
    const auto k = surrogate_kind_from_string(kind);
    if (map.empty() && k == SurrogateKind::Geman) map["epsilon"] = 0.5;
    return {k, std::move(map)};
}

index_set_t parse_index_list(const std::string& text)
{
    index_set_t out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        long v = 0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v < 0) {
            throw InputError("--important expects comma-separated nonnegative integers");
        }
        out.push_back(static_cast<index_t>(v));
    }
    if (out.empty()) throw InputError("--important is empty");
    return out;
}

struct GlobalFlags
{
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    bool quiet = false;
};

// -- prox ------------------------------------------------------------------

struct ProxFlags
{
    std::string kind;
    std::vector<std::string> params;
    double y = 0.0;
    double lam = 1.0;
    double tol = 1e-10;
    bool oracle = false;
    double grid_step = 1e-6;
};

int cmd_prox(const ProxFlags& f, std::ostream& out)
{
    const auto g = surrogate_from_flags(f.kind, f.params);
    ProxProblem p{std::abs(f.y), f.lam, g, f.tol};
    const auto sol = solve_threshold(p);
    const double sign = std::signbit(f.y) ? -1.0 : 1.0;
    json j = {
        {"x_star", sign * sol.x_star},
        {"branch", std::string(to_string(sol.branch))},
        {"iterations", sol.iterations},
    };
    if (f.oracle) {
        const double o = sign * oracle_threshold(p, f.grid_step);
        j["oracle"] = o;
        j["gap"] = sign * sol.x_star - o;
    }
    out << j.dump() << "\n";
    return exit_ok;
}

// -- solve -----------------------------------------------------------------

struct SolveFlags
{
    std::string cov;
    std::string samples;
    std::string important;
    std::optional<long> h;
    std::string mean;
    double tau = 0.1;
    double lam = 1.0;
    std::string kind = "geman";
    std::vector<std::string> params;
    std::string mode = "important_rows";
    std::string method = "eigen";
    std::size_t max_outer = 200;
    double outer_tol = 1e-7;
    double eta = 1.0;
    double inner_tol = 1e-9;
    std::size_t inner_max_iter = 10000;
    std::string out_dir;
};

int cmd_solve(const SolveFlags& f, const GlobalFlags& gf, std::ostream& out)
{
    if (f.cov.empty() == f.samples.empty()) throw InputError("solve needs exactly one of --cov or --samples");
    RunManifest manifest("solve", json::object(), gf.seed);

    GgmProblem problem;
    std::optional<vector_t> mean;
    if (!f.cov.empty()) {
        problem.sigma_hat = io::read_square_matrix(f.cov);
        manifest.add_input(f.cov);
    } else {
        const auto samples = io::read_samples_csv(f.samples);
        manifest.add_input(f.samples);
        auto st = sample_statistics(samples.values);
        problem.sigma_hat = std::move(st.cov);
        mean = std::move(st.mean);
    }
    if (!f.mean.empty()) {
        mean = io::read_vector(f.mean);
        manifest.add_input(f.mean);
    }

    if (!f.important.empty()) {
        problem.important_set = parse_index_list(f.important);
    } else if (f.h) {
        if (!mean) throw InputError("--h needs --mean FILE or --samples FILE to rank nodes");
        if (mean->size() != problem.sigma_hat.rows()) throw InputError("mean length does not match covariance");
        problem.important_set = select_important(*mean, static_cast<index_t>(*f.h));
    }
    problem.mode = penalty_mode_from_string(f.mode);
    if (problem.important_set.empty() && problem.mode == PenaltyMode::ImportantRows) {
        throw InputError("important_rows mode needs --important or --h");
    }
    problem.tau = f.tau;
    problem.lam = f.lam;
    problem.g = surrogate_from_flags(f.kind, f.params);

    GgmSolverOptions opts;
    opts.max_outer = f.max_outer;
    opts.outer_tol = f.outer_tol;
    opts.precision_method = precision_method_from_string(f.method);
    opts.gradient.eta = f.eta;
    opts.gradient.tol = f.inner_tol;
    opts.gradient.max_iter = f.inner_max_iter;

    logger()->info("solve: n={} h={} tau={} lambda={} surrogate={}", problem.size(), problem.important_set.size(),
                   problem.tau, problem.lam, to_string(problem.g.kind()));
    const auto report = solve_ggm(problem, opts);

    ensure_dir(f.out_dir);
    write_json(fs::path(f.out_dir) / "report.json", io::report_to_json(report));
    manifest.set_config({{"important_set", io::index_set_to_json(problem.important_set)},
                         {"tau", problem.tau},
                         {"lambda", problem.lam},
                         {"surrogate", io::surrogate_to_json(problem.g)},
                         {"penalty_mode", std::string(to_string(problem.mode))},
                         {"solver", io::solver_options_to_json(opts)}});
    manifest.write(fs::path(f.out_dir) / "manifest.json");

    if (!gf.quiet) {
        std::vector<index_t> order(static_cast<std::size_t>(report.group_norms.size()));
        std::iota(order.begin(), order.end(), index_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](index_t a, index_t b) { return report.group_norms(a) > report.group_norms(b); });
        out << "iterations=" << report.iterations << " converged=" << (report.converged ? "true" : "false")
            << " top_group_norms=";
        for (std::size_t k = 0; k < std::min<std::size_t>(5, order.size()); ++k) {
            out << (k ? "," : "") << order[k] << ":" << io::format_double(report.group_norms(order[k]));
        }
        out << "\n";
    }
    return exit_ok;
}

// -- simulate --------------------------------------------------------------

struct SimulateFlags
{
    std::string config;
    std::string out_dir;
    std::string seeds;
};

void simulate_one(const PipelineConfig& cfg, const json& raw_config, const fs::path& config_path,
                  const fs::path& out_dir, std::optional<std::uint64_t> seed)
{
    RunManifest manifest("simulate", raw_config, seed);
    manifest.add_input(config_path);
    if (!cfg.samples_csv.empty()) manifest.add_input(cfg.samples_csv);
    if (!cfg.dump_dir.empty()) manifest.add_input(cfg.dump_dir);

    const auto res = run_pipeline(cfg);
    ensure_dir(out_dir);
    write_json(out_dir / "selection.json", io::selection_to_json(res.selection));
    write_json(out_dir / "report.json", io::report_to_json(res.report));
    io::write_text(out_dir / "samples.csv", io::samples_to_csv(res.samples));
    if (res.planted) {
        const auto& pl = *res.planted;
        write_json(out_dir / "planted.json",
                   {{"important_set", io::index_set_to_json(pl.important_set)},
                    {"true_connected", io::index_set_to_json(pl.true_connected)},
                    {"recovery_f1", recovery_f1(res.selection.solver_selected, pl.true_connected)}});
        logger()->info("simulate seed={} recovery_f1={}", pl.seed,
                       recovery_f1(res.selection.solver_selected, pl.true_connected));
    }
    manifest.write(out_dir / "manifest.json");
}

int cmd_simulate(const SimulateFlags& f, const GlobalFlags& gf, std::ostream& out)
{
    json raw;
    try {
        raw = json::parse(io::read_text(f.config));
    } catch (const json::parse_error& e) {
        throw InputError(f.config + ": " + e.what());
    }
    PipelineConfig cfg = io::pipeline_config_from_json(raw);
    if (gf.seed) cfg.planted.seed = *gf.seed;

    if (f.seeds.empty()) {
        simulate_one(cfg, raw, f.config, f.out_dir, cfg.planted.seed);
        if (!gf.quiet) out << "wrote " << f.out_dir << "\n";
        return exit_ok;
    }

    std::vector<std::uint64_t> seeds;
    for (auto i : parse_index_list(f.seeds)) seeds.push_back(static_cast<std::uint64_t>(i));
    ensure_dir(f.out_dir);

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        while (true) {
            const std::size_t k = next.fetch_add(1);
            if (k >= seeds.size()) return;
            try {
                PipelineConfig local = cfg;
                local.planted.seed = seeds[k];
                json local_raw = raw;
                local_raw["seed"] = seeds[k];
                simulate_one(local, local_raw, f.config,
                             fs::path(f.out_dir) / ("seed_" + std::to_string(seeds[k])), seeds[k]);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    const unsigned jobs = std::max(1U, std::min<unsigned>(gf.jobs, static_cast<unsigned>(seeds.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
    if (!gf.quiet) out << "wrote " << seeds.size() << " runs under " << f.out_dir << "\n";
    return exit_ok;
}

// -- score -----------------------------------------------------------------

struct ScoreFlags
{
    std::string dump;
    double beta1 = 0.85;
    double beta2 = 0.85;
    std::string out_file;
};

int cmd_score(const ScoreFlags& f, const GlobalFlags& gf, std::ostream& out)
{
    RunManifest manifest("score", {{"beta1", f.beta1}, {"beta2", f.beta2}}, gf.seed);
    const auto records = io::read_dump_dir(f.dump);
    manifest.add_input(f.dump);
    const auto samples = replay_scores(records, f.beta1, f.beta2);
    const fs::path out_path(f.out_file);
    if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
    io::write_text(out_path, io::samples_to_csv(samples));
    manifest.write(out_path.string() + ".manifest.json");
    if (!gf.quiet) out << "steps=" << samples.steps() << " nodes=" << samples.nodes() << "\n";
    return exit_ok;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Node selection with l2,g-regularized Gaussian graphical models", "ggm-select"};
    app.require_subcommand(1);
    // "-h" is left free for solve's --h.
    app.set_help_flag("--help", "print this help message and exit");
    app.set_version_flag("--version", tool_version);

    GlobalFlags gf;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "RNG seed (overrides config seeds)");
    app.add_option("--jobs", gf.jobs, "parallel runs for multi-seed sweeps")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", gf.quiet, "suppress summary lines");

    ProxFlags pf;
    auto* prox = app.add_subcommand("prox", "solve argmin_x 1/2 (y - x)^2 + lam g(x)");
    prox->add_option("--kind", pf.kind, "surrogate kind")->required();
    prox->add_option("--param", pf.params, "surrogate parameter key=value (repeatable)");
    prox->add_option("--y", pf.y, "input magnitude")->required();
    prox->add_option("--lam", pf.lam, "threshold weight")->required();
    prox->add_option("--tol", pf.tol, "fixed-point tolerance")->capture_default_str();
    prox->add_flag("--oracle", pf.oracle, "also report the grid-search answer and the gap");
    prox->add_option("--grid-step", pf.grid_step, "oracle grid step")->capture_default_str();

    SolveFlags sf;
    auto* solve = app.add_subcommand("solve", "solve the GGM for a covariance matrix");
    solve->add_option("--cov", sf.cov, "covariance matrix (headerless CSV or JSON {n, data})");
    solve->add_option("--samples", sf.samples, "sample CSV; covariance and mean are computed from it");
    solve->add_option("--important", sf.important, "0-based important node indices, e.g. 1,4,9");
    solve->add_option("--h", sf.h, "important set size, ranked by --mean or the sample mean");
    solve->add_option("--mean", sf.mean, "node mean values (CSV row/column or JSON array)");
    solve->add_option("--tau", sf.tau)->capture_default_str();
    solve->add_option("--lam", sf.lam)->capture_default_str();
    solve->add_option("--kind", sf.kind)->capture_default_str();
    solve->add_option("--param", sf.params, "surrogate parameter key=value (repeatable)");
    solve->add_option("--mode", sf.mode, "important_rows | full_offdiag")->capture_default_str();
    solve->add_option("--method", sf.method, "eigen | gradient")->capture_default_str();
    solve->add_option("--max-outer", sf.max_outer)->capture_default_str();
    solve->add_option("--outer-tol", sf.outer_tol)->capture_default_str();
    solve->add_option("--eta", sf.eta)->capture_default_str();
    solve->add_option("--inner-tol", sf.inner_tol)->capture_default_str();
    solve->add_option("--inner-max-iter", sf.inner_max_iter)->capture_default_str();
    solve->add_option("--out", sf.out_dir, "output directory")->required();

    SimulateFlags mf;
    auto* simulate = app.add_subcommand("simulate", "run the selection pipeline from a JSON config");
    simulate->add_option("--config", mf.config, "pipeline config")->required();
    simulate->add_option("--out", mf.out_dir, "output directory")->required();
    simulate->add_option("--seeds", mf.seeds, "comma-separated seed sweep, one subdirectory per seed");

    ScoreFlags cf;
    auto* score = app.add_subcommand("score", "replay a score dump into a node-value sample CSV");
    score->add_option("--dump", cf.dump, "dump directory")->required();
    score->add_option("--beta1", cf.beta1)->capture_default_str();
    score->add_option("--beta2", cf.beta2)->capture_default_str();
    score->add_option("--out", cf.out_file, "output CSV")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return exit_usage;
    }
    if (seed_opt->count() > 0) gf.seed = seed_value;

    try {
        if (prox->parsed()) return cmd_prox(pf, out);
        if (solve->parsed()) return cmd_solve(sf, gf, out);
        if (simulate->parsed()) return cmd_simulate(mf, gf, out);
        if (score->parsed()) return cmd_score(cf, gf, out);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return exit_io;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return exit_numerical;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return exit_io;
    }
    return exit_usage;
}

} // namespace ggmsel::cli
