#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pdeop/bench.hpp"
#include "pdeop/io.hpp"
#include "pdeop/nn.hpp"
#include "pdeop/stochastic.hpp"

using namespace pdeop;
using namespace pdeop::bench;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("pdeop_test_bench_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

const char* kVoltageConfig = R"(# voltage baseline
schema_version = 1
system = voltage
method = adjoint
target = constant
seed = 3
)";

}  // namespace

TEST_CASE("config parsing") {
    const auto c = parse_config(kVoltageConfig);
    CHECK(c.system == SystemKind::Voltage);
    CHECK(c.method == Method::Adjoint);
    CHECK(c.seed == 3);
    CHECK(c.target_profile().value(0.3) == 1.0);

    CHECK_THROWS_AS(parse_config("schema_version = 1\nsytem = heat\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("system = heat\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("schema_version = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("schema_version = 1\nseed = 1\nseed = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("schema_version = 1\nhorizon = ten\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("schema_version = 1\nhorizon = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("schema_version = 1\njust a line\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("schema_version = 1\nsystem = voltage\ntarget = parabola\n"), ConfigError);

    SUBCASE("method/system compatibility") {
        CHECK(compatible(SystemKind::Voltage, Method::Direct));
        CHECK_FALSE(compatible(SystemKind::Heat, Method::Direct));
        CHECK(compatible(SystemKind::Heat, Method::Lmpc));
        CHECK_FALSE(compatible(SystemKind::Burgers, Method::Lmpc));
        CHECK(compatible(SystemKind::Burgers, Method::Nmpc));
        CHECK_FALSE(compatible(SystemKind::Voltage, Method::Nmpc));
        for (auto s : {SystemKind::Voltage, SystemKind::Heat, SystemKind::Burgers}) {
            CHECK(compatible(s, Method::Adjoint));
            CHECK(compatible(s, Method::Pdeop));
        }
        CHECK_THROWS_AS(parse_config("schema_version = 1\nsystem = heat\nmethod = direct\n"), ConfigError);
        ExperimentConfig bad;
        bad.system = SystemKind::Burgers;
        bad.method = Method::Lmpc;
        // rejected before any compute
        CHECK_THROWS_AS(execute(bad), ConfigError);
    }
}

TEST_CASE("config hash") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);

    auto a = parse_config(kVoltageConfig);
    auto b = a;
    b.out = "elsewhere";
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b.target = "constant:1";
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 4;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.gamma = 1e-3;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("result records and the ledger") {
    auto dir = scratch("ledger");
    ResultRecord r;
    r.config_hash = "0123456789abcdef";
    r.system = "heat";
    r.method = "lmpc";
    r.target = "sine:0.6,0.3,0,2";
    r.mse = 3.5e-4;
    r.obj_terminal = 1.0;
    r.obj_effort = 0.25;
    r.wall_seconds = 0.5;
    r.forward_solves = 7;
    r.backward_solves = 2;
    r.timestamp = "2026-01-01T00:00:00Z";
    r.terminal = {0.1, 0.2};

    const auto back = record_from_json(to_json(r));
    CHECK(back.mse == r.mse);
    CHECK(back.target == r.target);
    CHECK(back.terminal == r.terminal);
    CHECK(back.forward_solves == 7);
    CHECK_THROWS_AS(record_from_json("{"), ConfigError);
    CHECK_THROWS_AS(record_from_json("{}"), ConfigError);

    const auto path = dir / "ledger.csv";
    append_ledger(path, r);
    r.method = "adjoint";
    append_ledger(path, r);
    const auto rows = read_ledger(path);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].method == "lmpc");
    CHECK(rows[1].method == "adjoint");
    CHECK(rows[0].target == "sine:0.6,0.3,0,2");
    CHECK(rows[0].mse == doctest::Approx(3.5e-4));
    CHECK(rows[1].backward_solves == 2);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == kLedgerHeader);

    io::write_text(dir / "bad.csv", std::string(kLedgerHeader) + "\n1,2,3\n");
    CHECK_THROWS_AS(read_ledger(dir / "bad.csv"), ConfigError);
    io::write_text(dir / "bad2.csv", "a,b\n");
    CHECK_THROWS_AS(read_ledger(dir / "bad2.csv"), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("run_experiment") {
    auto dir = scratch("run");
    SUBCASE("voltage adjoint on the constant target") {
        auto c = parse_config(kVoltageConfig);
        c.out = dir;
        const auto r = run_experiment(c);
        CHECK(r.ok);
        CHECK(r.mse <= 1e-9);
        CHECK(r.mse >= 0.0);
        CHECK(r.wall_seconds > 0.0);
        CHECK(r.backward_solves > 0);
        CHECK(std::filesystem::exists(dir / "records" / (r.config_hash + ".json")));
        const auto rows = read_ledger(dir / "ledger.csv");
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].config_hash == r.config_hash);

        // determinism: only the wall time may differ
        const auto again = execute(c);
        CHECK(again.mse == r.mse);
        CHECK(again.obj_total == r.obj_total);
        CHECK(again.forward_solves == r.forward_solves);
        CHECK(again.terminal == r.terminal);
    }
    SUBCASE("heat lmpc on the sine target") {
        ExperimentConfig c;
        c.system = SystemKind::Heat;
        c.method = Method::Lmpc;
        c.target = "sine";
        c.out = dir;
        const auto r = run_experiment(c);
        CHECK(r.mse <= 7e-4);
        CHECK(r.horizon == 10);
        CHECK(r.obj_terminal >= 0.0);
    }
    SUBCASE("pdeop without checkpoints is a config error") {
        ExperimentConfig c;
        c.method = Method::Pdeop;
        c.artifacts = dir / "none";
        CHECK_THROWS_AS(execute(c), ConfigError);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("suites") {
    SUBCASE("default and full suites mirror the comparison tables") {
        const auto s = default_suite("out", "art");
        REQUIRE(s.runs.size() == 9);
        const std::vector<std::string> expected{"voltage direct", "voltage adjoint", "voltage pdeop",
                                                "heat lmpc",      "heat adjoint",    "heat pdeop",
                                                "burgers nmpc",   "burgers adjoint", "burgers pdeop"};
        for (std::size_t i = 0; i < 9; ++i) {
            CHECK(pdeop::to_string(s.runs[i].system) + " " + to_string(s.runs[i].method) == expected[i]);
            CHECK(s.runs[i].target == "sine");
        }
        CHECK(full_suite("out", "art").runs.size() == 27);
    }
    SUBCASE("suite file parsing") {
        const auto s = parse_suite("schema_version = 1\nout = r\nhorizon = 5\n"
                                   "run = heat lmpc sine\nrun = burgers nmpc parabola\n");
        REQUIRE(s.runs.size() == 2);
        CHECK(s.runs[1].horizon == 5);
        CHECK(s.runs[1].target == "parabola");
        CHECK(s.out == "r");
        CHECK_THROWS_AS(parse_suite("schema_version = 1\nrun = heat direct sine\n"), ConfigError);
        CHECK_THROWS_AS(parse_suite("schema_version = 1\nrun = heat lmpc\n"), ConfigError);
        CHECK_THROWS_AS(parse_suite("schema_version = 1\nsystem = heat\n"), ConfigError);
    }
    SUBCASE("empty suite succeeds with an empty table") {
        auto dir = scratch("empty");
        Suite s;
        s.out = dir;
        const auto rep = run_suite(s, 2);
        CHECK(rep.records.empty());
        CHECK(io::read_text(rep.table_csv).find('\n') == io::read_text(rep.table_csv).size() - 1);
        std::filesystem::remove_all(dir);
    }
    SUBCASE("parallel workers, per-row failures and plots") {
        auto dir = scratch("suite");
        const auto s = parse_suite("schema_version = 1\nout = " + dir.string() + "\nartifacts = " +
                                   (dir / "missing").string() +
                                   "\nrun = voltage adjoint constant\nrun = voltage pdeop sine\n"
                                   "run = heat lmpc constant\nrun = voltage adjoint ramp\n");
        const auto rep = run_suite(s, 2);
        REQUIRE(rep.records.size() == 4);
        CHECK(rep.records[0].ok);
        CHECK_FALSE(rep.records[1].ok);
        CHECK(rep.records[1].error.find("missing checkpoint") != std::string::npos);
        CHECK(rep.records[2].ok);
        CHECK(rep.records[2].mse <= 1e-10);
        CHECK(rep.records[3].ok);
        CHECK(read_ledger(dir / "ledger.csv").size() == 3);
        CHECK(io::read_text(rep.table_text).find("FAILED") != std::string::npos);
        REQUIRE(rep.plots.size() == 3);
        for (const auto& p : rep.plots) CHECK(io::read_text(p).rfind("<svg", 0) == 0);

        // same rows in one process give identical numbers; plots do not change them
        const auto serial = run_suite(s, 1, false);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(serial.records[i].ok == rep.records[i].ok);
            CHECK(serial.records[i].mse == rep.records[i].mse);
        }
        CHECK(read_ledger(dir / "ledger.csv").size() == 6);
        std::filesystem::remove_all(dir);
    }
}

TEST_CASE("svg plots") {
    Series a{"a", {0, 1, 2}, {0, 1, 4}, false};
    Series b{"b", {0, 1, 2}, {1, 1, 1}, true};
    const auto svg = line_plot_svg("t", "x", "y", {a, b});
    CHECK(svg.rfind("<svg", 0) == 0);
    std::size_t count = 0;
    for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++count;
    CHECK(count == 2);
    CHECK(svg.find("</svg>") != std::string::npos);

    const Mat e = Mat::Random(5, 4), p = Mat::Random(5, 4);
    const auto tri = heatmap_triptych_svg("h", e, p, 1.0, 1.0);
    CHECK(tri.find("absolute error") != std::string::npos);
    CHECK_THROWS_AS(heatmap_triptych_svg("h", e, Mat::Zero(4, 4), 1.0, 1.0), DimensionError);
}

TEST_CASE("pipeline") {
    auto dir = scratch("pipeline");
    PipelineOptions o;
    o.artifacts = dir;
    o.systems = {SystemKind::Voltage};
    o.trajectories = 30;
    o.operator_epochs = 2;
    o.pdeop_epochs = 2;
    o.tasks = 6;

    SUBCASE("stage errors carry the stage label") {
        PipelineOptions only = o;
        only.run_dataset = false;
        only.run_operator = false;
        try {
            generate_all(only);
            FAIL("expected a stage error");
        } catch (const StageError& e) {
            CHECK(e.stage() == "voltage/train-pdeop");
        }
    }
    SUBCASE("voltage pipeline emits three checkpoints and is idempotent") {
        const auto first = generate_all(o);
        REQUIRE(first.size() == 1);
        CHECK(first[0].dataset_built);
        CHECK(first[0].operator_trained);
        CHECK(first[0].pdeop_trained);
        const auto sys = artifact_dir(dir, SystemKind::Voltage);
        for (const char* f : {"operator.ckpt", "controller.ckpt", "joint.ckpt"})
            CHECK(std::filesystem::exists(sys / f));
        const auto ds = stochastic::load_dataset(sys / "dataset");
        CHECK(ds.splits.train.size() == 24);
        CHECK(ds.splits.validation.size() == 3);
        CHECK(ds.splits.test.size() == 3);

        const auto stamp = std::filesystem::last_write_time(sys / "joint.ckpt");
        const auto second = generate_all(o);
        CHECK_FALSE(second[0].dataset_built);
        CHECK_FALSE(second[0].operator_trained);
        CHECK_FALSE(second[0].pdeop_trained);
        CHECK(std::filesystem::last_write_time(sys / "joint.ckpt") == stamp);

        // the trained artifacts drive a pdeop experiment
        ExperimentConfig c;
        c.method = Method::Pdeop;
        c.artifacts = dir;
        c.out = dir / "results";
        const auto r = execute(c);
        CHECK(r.ok);
        CHECK(r.wall_seconds > 0.0);
        CHECK(r.predicted_terminal.size() == r.terminal.size());

        PipelineOptions forced = o;
        forced.force = true;
        forced.run_dataset = false;
        const auto third = generate_all(forced);
        CHECK_FALSE(third[0].dataset_built);
        CHECK(third[0].operator_trained);
        CHECK(third[0].pdeop_trained);
    }
    std::filesystem::remove_all(dir);
}
