#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mfb/config.hpp"
#include "mfb/solver.hpp"

namespace mfb {

// 17 significant digits: the shortest string that round-trips any double.
inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline constexpr const char* kBranchFormatTag = "# mfblab-branch-v1";

inline void write_branch(const std::string& path, const Branch& branch,
                         const ProblemSpec& spec) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    const RadialGrid& g = *spec.grid;
    out << kBranchFormatTag << "\n";
    out << "# m=" << g.dim().m << " node_count=" << g.size() << " radius=" << fmt_g17(g.radius())
        << " kappa=" << fmt_g17(g.kappa()) << "\n";
    out << "# termination=" << termination_name(branch.termination)
        << " fold_lambda=" << fmt_g17(branch.fold_lambda)
        << " fold_u_max=" << fmt_g17(branch.fold_u_max) << "\n";
    out << "# columns: arclength lambda sigma rho alpha u_max residual_norm u[0..H-1]\n";
    for (std::size_t i = 0; i < branch.states.size(); ++i) {
        const SolutionState& s = branch.states[i];
        out << fmt_g17(branch.arclength[i]) << ' ' << fmt_g17(s.lambda) << ' '
            << fmt_g17(s.sigma) << ' ' << fmt_g17(s.rho) << ' ' << fmt_g17(s.alpha) << ' '
            << fmt_g17(s.u_max) << ' ' << fmt_g17(s.residual_norm);
        for (int j = 0; j < s.u.values.size(); ++j) out << ' ' << fmt_g17(s.u.values[j]);
        out << "\n";
    }
    if (!out) throw ConfigError("write failed for '" + path + "'");
}

struct BranchFile {
    bool empty = true;  // a zero-length file parses as an empty branch
    int m = 0;
    int node_count = 0;
    double radius = 0.0;
    double kappa = 0.0;
    ProblemSpec spec;  // grid reconstructed from the header when non-empty
    Branch branch;
};

namespace detail {

inline double parse_field_g(const std::string& tok, const std::string& path, int ln) {
    double v = 0.0;
    const char* end = scan_double(tok, v);
    if (end != tok.data() + tok.size())
        throw ConfigError(path + " line " + std::to_string(ln) + ": bad number '" + tok + "'");
    return v;
}

inline std::string header_value(const std::string& line, const std::string& key,
                                const std::string& path, int ln) {
    const std::string pat = key + "=";
    const auto pos = line.find(pat);
    if (pos == std::string::npos)
        throw ConfigError(path + " line " + std::to_string(ln) + ": missing '" + key + "'");
    auto end = line.find(' ', pos);
    if (end == std::string::npos) end = line.size();
    return line.substr(pos + pat.size(), end - pos - pat.size());
}

}  // namespace detail

inline BranchFile read_branch(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open branch file '" + path + "'");
    BranchFile bf;
    std::string line;
    int ln = 0;

    if (!std::getline(in, line)) return bf;  // zero-length file: empty branch
    ++ln;
    if (detail::trim(line) != kBranchFormatTag)
        throw ConfigError(path + " line 1: not a branch file (expected '" +
                          std::string(kBranchFormatTag) + "')");

    if (!std::getline(in, line)) throw ConfigError(path + " line 2: truncated header");
    ++ln;
    bf.m = static_cast<int>(detail::parse_field_g(detail::header_value(line, "m", path, ln), path, ln));
    bf.node_count = static_cast<int>(
        detail::parse_field_g(detail::header_value(line, "node_count", path, ln), path, ln));
    bf.radius = detail::parse_field_g(detail::header_value(line, "radius", path, ln), path, ln);
    bf.kappa = detail::parse_field_g(detail::header_value(line, "kappa", path, ln), path, ln);

    if (!std::getline(in, line)) throw ConfigError(path + " line 3: truncated header");
    ++ln;
    const std::string term = detail::header_value(line, "termination", path, ln);
    if (term == "max_u_reached")
        bf.branch.termination = Termination::max_u_reached;
    else if (term == "step_limit")
        bf.branch.termination = Termination::step_limit;
    else if (term == "newton_failure")
        bf.branch.termination = Termination::newton_failure;
    else
        throw ConfigError(path + " line 3: unknown termination '" + term + "'");
    bf.branch.fold_lambda =
        detail::parse_field_g(detail::header_value(line, "fold_lambda", path, ln), path, ln);
    bf.branch.fold_u_max =
        detail::parse_field_g(detail::header_value(line, "fold_u_max", path, ln), path, ln);

    if (!std::getline(in, line)) throw ConfigError(path + " line 4: truncated header");
    ++ln;  // columns comment, content not interpreted

    try {
        bf.spec = make_problem(bf.m, bf.node_count, bf.radius, bf.kappa);
    } catch (const std::exception& e) {
        throw ConfigError(path + " line 2: bad grid parameters (" + e.what() + ")");
    }
    bf.empty = false;

    const int H = bf.node_count;
    while (std::getline(in, line)) {
        ++ln;
        line = detail::trim(line);
        if (line.empty()) continue;
        std::istringstream is(line);
        std::vector<std::string> toks;
        std::string t;
        while (is >> t) toks.push_back(t);
        if (static_cast<int>(toks.size()) != 7 + H)
            throw ConfigError(path + " line " + std::to_string(ln) + ": expected " +
                              std::to_string(7 + H) + " fields, got " +
                              std::to_string(toks.size()));
        SolutionState s;
        bf.branch.arclength.push_back(detail::parse_field_g(toks[0], path, ln));
        s.lambda = detail::parse_field_g(toks[1], path, ln);
        s.sigma = detail::parse_field_g(toks[2], path, ln);
        s.rho = detail::parse_field_g(toks[3], path, ln);
        s.alpha = detail::parse_field_g(toks[4], path, ln);
        s.u_max = detail::parse_field_g(toks[5], path, ln);
        s.residual_norm = detail::parse_field_g(toks[6], path, ln);
        Eigen::VectorXd u(H);
        for (int j = 0; j < H; ++j) u[j] = detail::parse_field_g(toks[7 + j], path, ln);
        s.u = {bf.spec.grid, std::move(u), +1};
        bf.branch.states.push_back(std::move(s));
        bf.branch.step_used.push_back(0.0);  // not serialized
    }
    return bf;
}

// Minimal CSV: numeric cells are %.17g so identical runs are byte-identical.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw ConfigError("cannot open '" + path + "' for writing");
        for (std::size_t i = 0; i < header.size(); ++i)
            out_ << (i ? "," : "") << header[i];
        out_ << "\n";
        width_ = header.size();
    }
    void row(const std::vector<double>& cells) {
        if (cells.size() != width_) throw std::logic_error("csv row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i)
            out_ << (i ? "," : "") << fmt_g17(cells[i]);
        out_ << "\n";
    }
    ~CsvWriter() { out_.flush(); }

  private:
    std::ofstream out_;
    std::size_t width_ = 0;
};

}  // namespace mfb
