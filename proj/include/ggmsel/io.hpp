#pragma once
#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>
#include <json.hpp>
#include <ggmsel/errors.hpp>
#include <ggmsel/ggm_core.hpp>
#include <ggmsel/node_model.hpp>
#include <ggmsel/surrogates.hpp>

namespace ggmsel::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const fs::path& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',')
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_number(std::string_view tok, double& v)
{
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

inline std::vector<std::string_view> lines(std::string_view text)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) pos = text.size();
        auto l = text.substr(start, pos - start);
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
        out.push_back(l);
        start = pos + 1;
    }
    return out;
}

} // namespace detail

struct CsvTable
{
    std::vector<std::string> header; ///< empty when the first row was numeric
    matrix_t values;
};

/// Comma-separated floats; a non-numeric first row is taken as a header.
inline CsvTable parse_csv(std::string_view text, std::string_view origin = "csv")
{
    CsvTable t;
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    for (auto raw : detail::lines(text)) {
        ++line_no;
        auto line = detail::trim(raw);
        if (line.empty()) continue;
        auto toks = detail::split(line);
        std::vector<double> row;
        row.reserve(toks.size());
        bool numeric = true;
        for (auto tok : toks) {
            double v = 0.0;
            if (!detail::parse_number(tok, v)) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (rows.empty() && t.header.empty()) {
                for (auto tok : toks) t.header.emplace_back(tok);
                continue;
            }
            throw InputError(std::string(origin) + ":" + std::to_string(line_no) + ": non-numeric field");
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw InputError(std::string(origin) + ":" + std::to_string(line_no) + ": ragged row");
        }
        if (!t.header.empty() && row.size() != t.header.size()) {
            throw InputError(std::string(origin) + ":" + std::to_string(line_no) + ": row width differs from header");
        }
        rows.push_back(std::move(row));
    }
    const auto m = static_cast<index_t>(rows.size());
    const auto n = rows.empty() ? static_cast<index_t>(t.header.size()) : static_cast<index_t>(rows.front().size());
    t.values.resize(m, n);
    for (index_t i = 0; i < m; ++i) {
        for (index_t j = 0; j < n; ++j) t.values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return t;
}

inline std::string to_csv(const matrix_t& m, const std::vector<std::string>& header = {})
{
    std::string out;
    if (!header.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (j) out += ',';
            out += header[j];
        }
        out += '\n';
    }
    for (index_t i = 0; i < m.rows(); ++i) {
        for (index_t j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

inline json matrix_to_json(const matrix_t& m)
{
    json data = json::array();
    for (index_t i = 0; i < m.rows(); ++i) {
        for (index_t j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    }
    return data;
}

/**
 * Square matrix from a headerless CSV or a JSON object
 * {"n": int, "data": [row-major floats]}.
 */
inline matrix_t parse_square_matrix(std::string_view text, std::string_view origin = "matrix")
{
    const auto body = detail::trim(text);
    if (!body.empty() && body.front() == '{') {
        json j;
        try {
            j = json::parse(body);
        } catch (const json::exception& e) {
            throw InputError(std::string(origin) + ": " + e.what());
        }
        if (!j.contains("n") || !j.contains("data") || !j["data"].is_array()) {
            throw InputError(std::string(origin) + ": expected {\"n\": int, \"data\": [...]}");
        }
        const auto n = j["n"].get<index_t>();
        const auto& data = j["data"];
        if (n < 1 || static_cast<index_t>(data.size()) != n * n) {
            throw InputError(std::string(origin) + ": data length is not n*n");
        }
        matrix_t m(n, n);
        for (index_t k = 0; k < n * n; ++k) {
            const auto& v = data[static_cast<std::size_t>(k)];
            if (!v.is_number()) throw InputError(std::string(origin) + ": non-numeric matrix entry");
            m(k / n, k % n) = v.get<double>();
        }
        return m;
    }
    auto t = parse_csv(text, origin);
    if (!t.header.empty()) throw InputError(std::string(origin) + ":1: non-numeric field");
    if (t.values.rows() == 0 || t.values.rows() != t.values.cols()) {
        throw InputError(std::string(origin) + ": matrix is not square");
    }
    return t.values;
}

inline matrix_t read_square_matrix(const fs::path& path)
{
    return parse_square_matrix(read_text(path), path.string());
}

inline std::vector<std::string> default_node_names(index_t n)
{
    std::vector<std::string> names;
    for (index_t i = 0; i < n; ++i) names.push_back("node" + std::to_string(i));
    return names;
}

inline std::string samples_to_csv(const SampleSet& s)
{
    return to_csv(s.values, s.names.empty() ? default_node_names(s.nodes()) : s.names);
}

inline SampleSet read_samples_csv(const fs::path& path)
{
    auto t = parse_csv(read_text(path), path.string());
    SampleSet s{std::move(t.values), std::move(t.header)};
    s.validate(false);
    return s;
}

/// Vector from a one-row or one-column CSV, or a JSON array.
inline vector_t read_vector(const fs::path& path)
{
    const auto text = read_text(path);
    const auto body = detail::trim(text);
    if (!body.empty() && body.front() == '[') {
        try {
            auto v = json::parse(body).get<std::vector<double>>();
            return Eigen::Map<vector_t>(v.data(), static_cast<index_t>(v.size()));
        } catch (const json::exception& e) {
            throw InputError(path.string() + ": " + e.what());
        }
    }
    auto t = parse_csv(text, path.string());
    if (t.values.rows() == 1) return t.values.row(0).transpose();
    if (t.values.cols() == 1) return t.values.col(0);
    throw InputError(path.string() + ": expected a single row or column");
}

// -- surrogates ------------------------------------------------------------

inline json surrogate_to_json(const SurrogateSpec& g)
{
    json params = json::object();
    for (const auto& [k, v] : g.params()) params[k] = v;
    return {{"kind", std::string(to_string(g.kind()))}, {"params", params}};
}

inline SurrogateSpec surrogate_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
        throw InputError("surrogate must be an object with a string 'kind'");
    }
    SurrogateSpec::param_map_t params;
    if (j.contains("params")) {
        if (!j["params"].is_object()) throw InputError("surrogate 'params' must be an object");
        for (const auto& [k, v] : j["params"].items()) {
            if (!v.is_number()) throw InputError("surrogate parameter '" + k + "' must be a number");
            params[k] = v.get<double>();
        }
    }
    return {surrogate_kind_from_string(j["kind"].get<std::string>()), std::move(params)};
}

// -- solver report -------------------------------------------------------

inline json report_to_json(const SolverReport& r)
{
    json trace = json::array();
    for (const auto& pt : r.objective_trace) trace.push_back({{"iteration", pt.iteration}, {"objective", pt.objective}});
    json norms = json::array();
    for (index_t i = 0; i < r.group_norms.size(); ++i) norms.push_back(r.group_norms(i));
    return {
        {"n", r.omega_star.rows()},
        {"omega", matrix_to_json(r.omega_star)},
        {"objective_trace", trace},
        {"converged", r.converged},
        {"iterations", r.iterations},
        {"group_norms", norms},
    };
}

// -- score dumps -----------------------------------------------------------

namespace detail {

inline std::size_t line_of_offset(std::string_view text, std::size_t offset)
{
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

inline ScoreRecord record_from_json(const json& j, const std::string& source)
{
    auto fail = [&](const std::string& what) { return InputError(source + ": " + what); };
    if (!j.is_object()) throw fail("record must be a JSON object");
    for (const char* key : {"step", "layer_id", "tensor", "values", "grads"}) {
        if (!j.contains(key)) throw fail(std::string("missing field '") + key + "'");
    }
    ScoreRecord r;
    r.source = source;
    try {
        r.step = j.at("step").get<long>();
        r.layer_id = j.at("layer_id").get<int>();
        const auto tensor = j.at("tensor").get<std::string>();
        if (tensor == "A" || tensor == "A_i") {
            r.tensor = TensorKind::A;
        } else if (tensor == "B" || tensor == "B_i") {
            r.tensor = TensorKind::B;
        } else if (tensor == "b") {
            r.tensor = TensorKind::Bias;
        } else {
            throw fail("tensor must be \"A_i\", \"B_i\" or \"b\"");
        }
        if (r.tensor != TensorKind::Bias) {
            if (!j.contains("index")) throw fail("missing field 'index'");
            r.index = j.at("index").get<int>();
        }
        r.values = j.at("values").get<std::vector<double>>();
        r.grads = j.at("grads").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw fail(e.what());
    }
    return r;
}

} // namespace detail

/**
 * Reads every *.json (one record or an array of records) and *.jsonl (one
 * record per line) file of a directory, in file-name order.
 */
inline std::vector<ScoreRecord> read_dump_dir(const fs::path& dir)
{
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw InputError("dump directory '" + dir.string() + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".json" || ext == ".jsonl")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("dump directory '" + dir.string() + "' has no .json/.jsonl records");

    std::vector<ScoreRecord> out;
    for (const auto& f : files) {
        const auto text = read_text(f);
        if (f.extension() == ".jsonl") {
            std::size_t line_no = 0;
            for (auto line : detail::lines(text)) {
                ++line_no;
                if (detail::trim(line).empty()) continue;
                const auto source = f.string() + ":" + std::to_string(line_no);
                json j;
                try {
                    j = json::parse(line);
                } catch (const json::exception& e) {
                    throw InputError(source + ": " + e.what());
                }
                out.push_back(detail::record_from_json(j, source));
            }
            continue;
        }
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw InputError(f.string() + ":" + std::to_string(detail::line_of_offset(text, e.byte)) + ": " + e.what());
        }
        if (j.is_array()) {
            for (std::size_t k = 0; k < j.size(); ++k) {
                out.push_back(detail::record_from_json(j[k], f.string() + ":record " + std::to_string(k)));
            }
        } else {
            out.push_back(detail::record_from_json(j, f.string() + ":1"));
        }
    }
    return out;
}

} // namespace ggmsel::io
