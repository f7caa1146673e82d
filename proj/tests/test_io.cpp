#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfb/config.hpp"
#include "mfb/io.hpp"
#include "mfb/solver.hpp"

using namespace mfb;
namespace fs = std::filesystem;

namespace {

fs::path tmp_path(const std::string& name) { return fs::temp_directory_path() / name; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("g17 formatting round-trips doubles exactly") {
    // round-trip through the same reader the checkpoint loader uses; stod
    // would reject the subnormal (glibc flags ERANGE on it)
    for (double v : {1.0 / 3.0, 4.0 * std::atan(1.0), 1e-300, 6.02214076e23, -0.0, 12.0,
                     5.0e-324}) {
        const std::string s = fmt_g17(v);
        double back = 0.0;
        REQUIRE(detail::scan_double(s, back) == s.data() + s.size());
        CHECK(back == v);
    }
    CHECK(fmt_g17(std::nan("")) == "nan");
}

TEST_CASE("config parsing: full file, comments, whitespace") {
    std::istringstream in(
        "# run setup\n"
        "m = 2\n"
        "node_count=128   # trailing comment\n"
        "radius = 1.0\n"
        "\n"
        "u_max_target = 12\n"
        "threshold_c = 2.0\n"
        "pohozaev_deltas = 0.25, 0.5 , 1.0\n"
        "output_dir = out/run1\n"
        "seed = 99\n");
    RunConfig c = parse_config(in);
    CHECK(c.m == 2);
    CHECK(c.node_count == 128);
    CHECK(c.u_max_target == 12.0);
    CHECK(c.threshold_c == 2.0);
    REQUIRE(c.pohozaev_deltas.size() == 3);
    CHECK(c.pohozaev_deltas[1] == 0.5);
    CHECK(c.output_dir == "out/run1");
    CHECK(c.seed == 99);
    CHECK(c.grid_kappa == 8.0);  // untouched default
}

TEST_CASE("config parsing rejects malformed input") {
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return parse_config(in);
    };
    CHECK_THROWS_AS(parse("mystery_key = 1\n"), ConfigError);        // unknown key
    CHECK_THROWS_AS(parse("m 2\n"), ConfigError);                    // no '='
    CHECK_THROWS_AS(parse("m =\n"), ConfigError);                    // missing value
    CHECK_THROWS_AS(parse("radius = fast\n"), ConfigError);          // not a number
    CHECK_THROWS_AS(parse("node_count = 12.5\n"), ConfigError);      // not an integer
    CHECK_THROWS_AS(parse("radius = 1.0x\n"), ConfigError);          // trailing junk
    CHECK_THROWS_AS(parse("pohozaev_deltas = 0.5,,1\n"), ConfigError);
    // line numbers are reported
    try {
        parse("m = 1\nwhat = 3\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("config validation enforces scientific ranges") {
    auto with = [](auto&& mod) {
        RunConfig c;
        mod(c);
        return c;
    };
    CHECK_THROWS_AS(validate_config(with([](RunConfig& c) { c.m = 7; })), ConfigError);
    CHECK_THROWS_AS(validate_config(with([](RunConfig& c) { c.node_count = 4; })), ConfigError);
    CHECK_THROWS_AS(validate_config(with([](RunConfig& c) { c.radius = -1.0; })), ConfigError);
    CHECK_THROWS_AS(validate_config(with([](RunConfig& c) { c.step_min = 2.0; })), ConfigError);
    CHECK_THROWS_AS(validate_config(with([](RunConfig& c) { c.annulus_r2 = 3.0; })), ConfigError);
    CHECK_THROWS_AS(validate_config(with([](RunConfig& c) { c.pohozaev_deltas = {2.0}; })),
                    ConfigError);
    CHECK_THROWS_AS(validate_config(with([](RunConfig& c) { c.r_loc = 0.5; })), ConfigError);
    CHECK_NOTHROW(validate_config(RunConfig{}));
}

TEST_CASE("branch files round-trip bit-exactly") {
    ProblemSpec spec = make_problem(1, 48, 1.0, 8.0);
    Branch br = trace_branch(spec, 0.5, 0.2);  // stops before the fold
    REQUIRE(br.termination == Termination::max_u_reached);
    REQUIRE(std::isnan(br.fold_lambda));

    const fs::path p = tmp_path("mfb_io_roundtrip.txt");
    write_branch(p.string(), br, spec);
    BranchFile bf = read_branch(p.string());

    CHECK_FALSE(bf.empty);
    CHECK(bf.m == 1);
    CHECK(bf.node_count == 48);
    CHECK(bf.radius == 1.0);
    CHECK(bf.kappa == 8.0);
    CHECK(bf.branch.termination == br.termination);
    CHECK(std::isnan(bf.branch.fold_lambda));
    REQUIRE(bf.branch.states.size() == br.states.size());
    for (std::size_t i = 0; i < br.states.size(); ++i) {
        CHECK(bf.branch.states[i].lambda == br.states[i].lambda);
        CHECK(bf.branch.states[i].sigma == br.states[i].sigma);
        CHECK(bf.branch.states[i].rho == br.states[i].rho);
        CHECK(bf.branch.states[i].alpha == br.states[i].alpha);
        CHECK(bf.branch.states[i].u_max == br.states[i].u_max);
        CHECK(bf.branch.arclength[i] == br.arclength[i]);
        CHECK((bf.branch.states[i].u.values - br.states[i].u.values).cwiseAbs().maxCoeff() ==
              0.0);
    }
    fs::remove(p);
}

TEST_CASE("fold metadata round-trips when present") {
    ProblemSpec spec = make_problem(1, 48, 1.0, 8.0);
    Branch br = trace_branch(spec, 3.0, 0.2);  // past the fold at u(0) = log 2
    REQUIRE(std::isfinite(br.fold_lambda));
    const fs::path p = tmp_path("mfb_io_fold.txt");
    write_branch(p.string(), br, spec);
    BranchFile bf = read_branch(p.string());
    CHECK(bf.branch.fold_lambda == br.fold_lambda);
    CHECK(bf.branch.fold_u_max == br.fold_u_max);
    fs::remove(p);
}

TEST_CASE("identical branches serialize to identical bytes") {
    ProblemSpec spec = make_problem(1, 48, 1.0, 8.0);
    Branch a = trace_branch(spec, 2.0, 0.2);
    Branch b = trace_branch(spec, 2.0, 0.2);
    const fs::path pa = tmp_path("mfb_io_det_a.txt"), pb = tmp_path("mfb_io_det_b.txt");
    write_branch(pa.string(), a, spec);
    write_branch(pb.string(), b, spec);
    CHECK(slurp(pa) == slurp(pb));
    fs::remove(pa);
    fs::remove(pb);
}

TEST_CASE("branch reader: empty files, bad tags, bad rows") {
    const fs::path p = tmp_path("mfb_io_bad.txt");

    {
        std::ofstream(p.string());  // zero-length
        BranchFile bf = read_branch(p.string());
        CHECK(bf.empty);
        CHECK(bf.branch.states.empty());
    }
    {
        std::ofstream out(p.string());
        out << "lambda,rho\n0.5,1\n";
    }
    CHECK_THROWS_AS(read_branch(p.string()), ConfigError);
    {
        std::ofstream out(p.string());
        out << kBranchFormatTag << "\n";
        out << "# m=1 node_count=48 radius=1 kappa=8\n";
        out << "# termination=max_u_reached fold_lambda=nan fold_u_max=nan\n";
        out << "# columns: ...\n";
        out << "0 0 0\n";  // too few fields
    }
    CHECK_THROWS_AS(read_branch(p.string()), ConfigError);
    {
        std::ofstream out(p.string());
        out << kBranchFormatTag << "\n";
        out << "# m=1 node_count=4 radius=1 kappa=8\n";  // grid too small
        out << "# termination=max_u_reached fold_lambda=nan fold_u_max=nan\n";
        out << "# columns: ...\n";
    }
    CHECK_THROWS_AS(read_branch(p.string()), ConfigError);
    fs::remove(p);
    CHECK_THROWS_AS(read_branch((tmp_path("mfb_io_missing.txt")).string()), ConfigError);
}

TEST_CASE("csv writer emits fixed-width rows") {
    const fs::path p = tmp_path("mfb_io_table.csv");
    {
        CsvWriter csv(p.string(), {"a", "b"});
        csv.row({1.0, 0.5});
        csv.row({2.0, 1.0 / 3.0});
        CHECK_THROWS_AS(csv.row({1.0}), std::logic_error);
    }
    const std::string text = slurp(p);
    CHECK(text == "a,b\n1,0.5\n2,0.33333333333333331\n");
    fs::remove(p);
}
