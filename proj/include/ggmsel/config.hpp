#pragma once
#include <string>
#include <json.hpp>
#include <ggmsel/errors.hpp>
#include <ggmsel/io.hpp>
#include <ggmsel/pipeline.hpp>

namespace ggmsel::io {

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback)
{
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError(std::string("config field '") + key + "' has the wrong type");
    }
}

} // namespace detail

inline GgmSolverOptions solver_options_from_json(const json& j, GgmSolverOptions o = {})
{
    if (j.is_null()) return o;
    if (!j.is_object()) throw InputError("config field 'solver' must be an object");
    o.max_outer = detail::get_or<std::size_t>(j, "max_outer", o.max_outer);
    o.max_outer = detail::get_or<std::size_t>(j, "T", o.max_outer);
    o.outer_tol = detail::get_or<double>(j, "outer_tol", o.outer_tol);
    if (j.contains("precision_method")) {
        o.precision_method = precision_method_from_string(detail::get_or<std::string>(j, "precision_method", ""));
    }
    o.gradient.eta = detail::get_or<double>(j, "eta", o.gradient.eta);
    o.gradient.tol = detail::get_or<double>(j, "inner_tol", o.gradient.tol);
    o.gradient.max_iter = detail::get_or<std::size_t>(j, "inner_max_iter", o.gradient.max_iter);
    o.prox_tol = detail::get_or<double>(j, "prox_tol", o.prox_tol);
    o.continuation = detail::get_or<double>(j, "continuation", o.continuation);
    return o;
}

inline json solver_options_to_json(const GgmSolverOptions& o)
{
    return {
        {"max_outer", o.max_outer},
        {"outer_tol", o.outer_tol},
        {"precision_method", std::string(to_string(o.precision_method))},
        {"eta", o.gradient.eta},
        {"inner_tol", o.gradient.tol},
        {"inner_max_iter", o.gradient.max_iter},
        {"prox_tol", o.prox_tol},
        {"continuation", o.continuation},
    };
}

inline SelectionCriterion selection_from_json(const json& j)
{
    if (!j.is_object()) throw InputError("config field 'selection' must be an object");
    SelectionCriterion c;
    if (j.contains("budget")) c.budget = detail::get_or<std::size_t>(j, "budget", 0);
    if (j.contains("threshold")) c.threshold = detail::get_or<double>(j, "threshold", 0.0);
    if (c.budget.has_value() == c.threshold.has_value()) {
        throw InputError("selection needs exactly one of 'budget' or 'threshold'");
    }
    c.full_column_norm = detail::get_or<bool>(j, "full_column_norm", false);
    return c;
}

/**
 * {mode: "planted"|"dump", n, h, k_connected, coupling, m, seed,
 *  surrogate: {kind, params}, tau, lambda, penalty_mode, solver: {...},
 *  selection: {"budget": int} | {"threshold": float}}
 *
 * Dump mode reads node values from "samples" (CSV) or "dump_dir".
 */
inline PipelineConfig pipeline_config_from_json(const json& j)
{
    if (!j.is_object()) throw InputError("config must be a JSON object");
    PipelineConfig c;
    const auto mode = detail::get_or<std::string>(j, "mode", "planted");
    if (mode == "planted") {
        c.source = PipelineConfig::Source::Planted;
    } else if (mode == "dump") {
        c.source = PipelineConfig::Source::Dump;
    } else {
        throw InputError("config 'mode' must be \"planted\" or \"dump\"");
    }
    c.planted.n = detail::get_or<index_t>(j, "n", c.planted.n);
    c.planted.k_connected = detail::get_or<index_t>(j, "k_connected", c.planted.k_connected);
    c.planted.coupling = detail::get_or<double>(j, "coupling", c.planted.coupling);
    c.planted.m = detail::get_or<index_t>(j, "m", c.planted.m);
    c.planted.seed = detail::get_or<std::uint64_t>(j, "seed", c.planted.seed);
    c.planted.max_diag_boost = detail::get_or<double>(j, "max_diag_boost", c.planted.max_diag_boost);
    if (!j.contains("h")) throw InputError("config requires 'h' (important set size)");
    c.h = detail::get_or<index_t>(j, "h", c.h);
    c.planted.h = c.h;

    c.samples_csv = detail::get_or<std::string>(j, "samples", "");
    c.dump_dir = detail::get_or<std::string>(j, "dump_dir", "");
    c.beta1 = detail::get_or<double>(j, "beta1", c.beta1);
    c.beta2 = detail::get_or<double>(j, "beta2", c.beta2);
    c.standardize = detail::get_or<bool>(j, "standardize", c.standardize);

    c.tau = detail::get_or<double>(j, "tau", c.tau);
    c.lam = detail::get_or<double>(j, "lambda", c.lam);
    if (j.contains("surrogate")) c.surrogate = surrogate_from_json(j["surrogate"]);
    if (j.contains("penalty_mode")) {
        c.mode = penalty_mode_from_string(detail::get_or<std::string>(j, "penalty_mode", ""));
    }
    if (j.contains("solver")) c.solver = solver_options_from_json(j["solver"], c.solver);
    if (j.contains("selection")) c.selection = selection_from_json(j["selection"]);
    return c;
}

inline json index_set_to_json(const index_set_t& s)
{
    json a = json::array();
    for (auto i : s) a.push_back(i);
    return a;
}

inline json selection_to_json(const SelectionResult& s)
{
    json scores = json::array();
    for (index_t i = 0; i < s.scores.size(); ++i) scores.push_back(s.scores(i));
    return {
        {"important_set", index_set_to_json(s.important_set)},
        {"solver_selected", index_set_to_json(s.solver_selected)},
        {"frozen", index_set_to_json(s.frozen)},
        {"scores", scores},
    };
}

} // namespace ggmsel::io
