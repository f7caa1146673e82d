#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfb {

// Raised for malformed configs, malformed checkpoints, and I/O failures;
// the CLI maps it to exit code 2 (everything else scientific = exit 1).
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    int m = 1;
    int node_count = 96;
    double radius = 1.0;
    double grid_kappa = 8.0;

    double u_max_target = 12.0;
    double step = 0.5;
    double step_min = 1e-6;
    double step_max = 1.0;
    int max_steps = 400;
    double newton_tol = 1e-10;
    int newton_max_iter = 25;

    double threshold_c = 0.0;  // 0 = use the domain-scaled default
    int max_points = 8;
    double r_loc = 50.0;
    double r_cmp = 5.0;
    double collar_width_fraction = 0.1;
    double annulus_r1 = 0.3;
    double annulus_r2 = 0.9;

    std::vector<double> pohozaev_deltas = {0.25, 0.5, 1.0};
    std::string output_dir = ".";
    unsigned long seed = 12345;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// std::from_chars, unlike stod, reads back every representable double
// (stod raises ERANGE on subnormals); consumes an optional leading '+'.
inline const char* scan_double(const std::string& raw, double& v) {
    const char* a = raw.data();
    const char* b = raw.data() + raw.size();
    if (a != b && *a == '+') ++a;
    const auto res = std::from_chars(a, b, v);
    return res.ec == std::errc{} ? res.ptr : nullptr;
}

inline double parse_double(const std::string& raw, int line) {
    double v = 0.0;
    const char* end = scan_double(raw, v);
    if (end == nullptr)
        throw ConfigError("line " + std::to_string(line) + ": expected a number, got '" + raw +
                          "'");
    if (end != raw.data() + raw.size())
        throw ConfigError("line " + std::to_string(line) + ": trailing characters in number '" +
                          raw + "'");
    return v;
}

inline long parse_int(const std::string& raw, int line) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(raw, &used);
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": expected an integer, got '" + raw +
                          "'");
    }
    if (used != raw.size())
        throw ConfigError("line " + std::to_string(line) + ": trailing characters in integer '" +
                          raw + "'");
    return v;
}

inline std::vector<double> parse_list(const std::string& raw, int line) {
    std::vector<double> out;
    std::string item;
    std::istringstream is(raw);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw ConfigError("line " + std::to_string(line) + ": empty list entry");
        out.push_back(parse_double(item, line));
    }
    if (out.empty()) throw ConfigError("line " + std::to_string(line) + ": empty list");
    return out;
}

}  // namespace detail

inline void validate_config(const RunConfig& c) {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (c.m < 1 || c.m > 6) fail("m must be in 1..6");
    if (c.node_count < 8) fail("node_count must be at least 8");
    if (!(c.radius > 0.0)) fail("radius must be positive");
    if (!(c.grid_kappa >= 0.0)) fail("grid_kappa must be nonnegative");
    if (!(c.u_max_target > 0.0)) fail("u_max_target must be positive");
    if (!(c.step > 0.0) || !(c.step_min > 0.0) || !(c.step_max > 0.0))
        fail("continuation steps must be positive");
    if (c.step_min > c.step_max) fail("step_min exceeds step_max");
    if (c.max_steps < 1) fail("max_steps must be at least 1");
    if (!(c.newton_tol > 0.0)) fail("newton_tol must be positive");
    if (c.newton_max_iter < 1) fail("newton_max_iter must be at least 1");
    if (c.threshold_c < 0.0) fail("threshold_c must be nonnegative");
    if (c.max_points < 1) fail("max_points must be at least 1");
    if (!(c.r_loc >= 1.0)) fail("r_loc must be at least 1");
    if (!(c.r_cmp > 0.0)) fail("r_cmp must be positive");
    if (!(c.collar_width_fraction > 0.0 && c.collar_width_fraction < 1.0))
        fail("collar_width_fraction must be in (0, 1)");
    if (!(0.0 < c.annulus_r1 && c.annulus_r1 < c.annulus_r2 && c.annulus_r2 <= c.radius))
        fail("annulus must satisfy 0 < r1 < r2 <= radius");
    for (double d : c.pohozaev_deltas)
        if (!(d > 0.0 && d <= c.radius)) fail("pohozaev deltas must lie in (0, radius]");
}

// Strict `key = value` format: '#' comments, unknown keys rejected so a typo
// cannot silently fall back to a default.
inline RunConfig parse_config(std::istream& in) {
    RunConfig c;
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(ln) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (val.empty()) throw ConfigError("line " + std::to_string(ln) + ": missing value");

        if (key == "m")
            c.m = static_cast<int>(detail::parse_int(val, ln));
        else if (key == "node_count")
            c.node_count = static_cast<int>(detail::parse_int(val, ln));
        else if (key == "radius")
            c.radius = detail::parse_double(val, ln);
        else if (key == "grid_kappa")
            c.grid_kappa = detail::parse_double(val, ln);
        else if (key == "u_max_target")
            c.u_max_target = detail::parse_double(val, ln);
        else if (key == "step")
            c.step = detail::parse_double(val, ln);
        else if (key == "step_min")
            c.step_min = detail::parse_double(val, ln);
        else if (key == "step_max")
            c.step_max = detail::parse_double(val, ln);
        else if (key == "max_steps")
            c.max_steps = static_cast<int>(detail::parse_int(val, ln));
        else if (key == "newton_tol")
            c.newton_tol = detail::parse_double(val, ln);
        else if (key == "newton_max_iter")
            c.newton_max_iter = static_cast<int>(detail::parse_int(val, ln));
        else if (key == "threshold_c")
            c.threshold_c = detail::parse_double(val, ln);
        else if (key == "max_points")
            c.max_points = static_cast<int>(detail::parse_int(val, ln));
        else if (key == "r_loc")
            c.r_loc = detail::parse_double(val, ln);
        else if (key == "r_cmp")
            c.r_cmp = detail::parse_double(val, ln);
        else if (key == "collar_width_fraction")
            c.collar_width_fraction = detail::parse_double(val, ln);
        else if (key == "annulus_r1")
            c.annulus_r1 = detail::parse_double(val, ln);
        else if (key == "annulus_r2")
            c.annulus_r2 = detail::parse_double(val, ln);
        else if (key == "pohozaev_deltas")
            c.pohozaev_deltas = detail::parse_list(val, ln);
        else if (key == "output_dir")
            c.output_dir = val;
        else if (key == "seed")
            c.seed = static_cast<unsigned long>(detail::parse_int(val, ln));
        else
            throw ConfigError("line " + std::to_string(ln) + ": unknown config key '" + key +
                              "'");
    }
    validate_config(c);
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in);
}

}  // namespace mfb
