#include "mfnet/cli.hpp"
#include "mfnet/error.hpp"
#include "mfnet/network_io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace mfnet;
namespace fs = std::filesystem;

namespace {

const fs::path kData = MFNET_DATA_DIR;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("mfnet_cli_" + name))
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

fs::path write_config(const fs::path& dir, const std::string& body)
{
    const fs::path p = dir / "config.json";
    std::ofstream(p) << body;
    return p;
}

std::string small_config()
{
    return R"({"network_file": ")" + (kData / "rshv1.json").string() + R"(", "seed": 5,
      "simulate": {"M_list": [10], "rho": 0.5, "t_max": 2, "replicas": 2, "record_events": true},
      "nlmp": {"L": 12, "T": 2, "rho": 0.05},
      "fixpoint": {"rho": 0.05},
      "contraction": {"K": 10, "pairs": 3},
      "margin": {"rho": 0.01, "contraction_pairs": 3, "lipschitz_pairs": 10, "rho_grid": [0, 0.001, 0.01]},
      "compare": {"M_list": [25], "rho": 0.2, "t_max": 200, "replicas": 2, "client_samples": 2000}})";
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "mfnet");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string body_without_header(const std::string& text)
{
    return text.rfind("# ", 0) == 0 ? text.substr(text.find('\n') + 1) : text;
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("fnv1a reference values")
    {
        CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
        CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
        CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
    }

    TEST_CASE("config parsing")
    {
        const auto doc = nlohmann::json::parse(small_config());
        const auto cfg = parse_config(doc, "/tmp");
        REQUIRE(cfg.simulate);
        CHECK(cfg.simulate->M_list == std::vector<long long>{10});
        CHECK(cfg.nlmp->L == 12);
        CHECK(cfg.compare->burn_in == 50.0);
        CHECK(cfg.seed == 5);

        auto bad = doc;
        bad["simulate"]["rho"] = -1;
        try {
            parse_config(bad, "/tmp");
            FAIL("expected ParseError");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ParseError);
            CHECK(std::string(e.what()).find("/simulate/rho") != std::string::npos);
        }
        auto unknown = doc;
        unknown["nlmp"]["LL"] = 3;
        CHECK_THROWS_AS(parse_config(unknown, "/tmp"), Error);

        const auto net = build_rshv1();
        CHECK(config_hash(cfg, net) == config_hash(parse_config(doc, "/tmp"), net));
        auto other = doc;
        other["seed"] = 6;
        CHECK(config_hash(parse_config(other, "/tmp"), net) != config_hash(cfg, net));
    }

    TEST_CASE("every subcommand runs and writes headed outputs")
    {
        TempDir dir("all");
        const auto cfg = write_config(dir.path, small_config());
        for (const std::string cmd : {"simulate", "nlmp", "fixpoint", "contraction", "margin", "compare"}) {
            const fs::path out = dir.path / cmd;
            const auto r = run({cmd, "--config", cfg.string(), "--out", out.string()});
            CHECK_MESSAGE(r.code == 0, cmd << ": " << r.err);
        }
        const std::string csv = slurp(dir.path / "simulate" / "simulate_M10_r0.csv");
        CHECK(csv.rfind("# mfnet simulate config_hash=", 0) == 0);
        CHECK(csv.find("seed=5") != std::string::npos);
        CHECK(fs::exists(dir.path / "simulate" / "events_M10_r1.csv"));
        CHECK(fs::exists(dir.path / "nlmp" / "nlmp_residual.csv"));
        CHECK(fs::exists(dir.path / "contraction" / "contraction.csv"));
        CHECK(fs::exists(dir.path / "margin" / "margin.csv"));
        CHECK(fs::exists(dir.path / "compare" / "compare.csv"));

        const auto fix = nlohmann::json::parse(slurp(dir.path / "fixpoint" / "fixpoint.json"));
        CHECK(fix.at("command") == "fixpoint");
        CHECK(fix.at("expected_customers").get<double>() == doctest::Approx(0.05).epsilon(1e-6));

        const auto nl = nlohmann::json::parse(slurp(dir.path / "nlmp" / "nlmp_summary.json"));
        CHECK(nl.at("max_commutation_residual").get<double>() < 1e-10);
    }

    TEST_CASE("outputs are reproducible and independent of --jobs")
    {
        TempDir dir("det");
        const auto cfg = write_config(dir.path, small_config());
        const auto a = run({"compare", "--config", cfg.string(), "--out", (dir.path / "a").string()});
        const auto b = run({"compare", "--config", cfg.string(), "--out", (dir.path / "b").string(), "--jobs", "3"});
        REQUIRE(a.code == 0);
        REQUIRE(b.code == 0);
        CHECK(body_without_header(slurp(dir.path / "a" / "compare.csv")) ==
              body_without_header(slurp(dir.path / "b" / "compare.csv")));
        const auto s1 = run({"simulate", "--config", cfg.string(), "--out", (dir.path / "s1").string()});
        const auto s2 = run({"simulate", "--config", cfg.string(), "--out", (dir.path / "s2").string(), "--jobs", "2"});
        CHECK(slurp(dir.path / "s1" / "simulate_M10_r1.csv") == slurp(dir.path / "s2" / "simulate_M10_r1.csv"));
        const auto s3 = run({"simulate", "--config", cfg.string(), "--out", (dir.path / "s3").string(), "--seed", "6"});
        CHECK(slurp(dir.path / "s1" / "simulate_M10_r1.csv") != slurp(dir.path / "s3" / "simulate_M10_r1.csv"));
    }

    TEST_CASE("failures map to exit codes")
    {
        TempDir dir("err");
        SUBCASE("missing network file")
        {
            const auto cfg = write_config(dir.path, R"({"network_file": "nowhere.json", "fixpoint": {"rho": 0.05}})");
            const auto r = run({"fixpoint", "--config", cfg.string(), "--out", (dir.path / "o").string()});
            CHECK(r.code == 1);
            CHECK(r.err.find("nowhere.json") != std::string::npos);
        }
        SUBCASE("bad field")
        {
            const auto cfg = write_config(dir.path, R"({"network_file": ")" + (kData / "rshv1.json").string() +
                                                        R"(", "nlmp": {"L": "big"}})");
            const auto r = run({"nlmp", "--config", cfg.string(), "--out", (dir.path / "o").string()});
            CHECK(r.code == 1);
            CHECK(r.err.find("/nlmp/L") != std::string::npos);
        }
        SUBCASE("syntax error")
        {
            const auto cfg = write_config(dir.path, "{\"network_file\": \n  ,}");
            const auto r = run({"fixpoint", "--config", cfg.string(), "--out", (dir.path / "o").string()});
            CHECK(r.code == 1);
            CHECK(r.err.find("line 2") != std::string::npos);
        }
        SUBCASE("infeasible load")
        {
            const auto cfg = write_config(dir.path, R"({"network_file": ")" + (kData / "rshv1.json").string() +
                                                        R"(", "fixpoint": {"rho": 1000000}})");
            const auto r = run({"fixpoint", "--config", cfg.string(), "--out", (dir.path / "o").string()});
            CHECK(r.code == 2);
            CHECK(r.err.find("LoadInfeasible") != std::string::npos);
        }
        SUBCASE("invalid network")
        {
            auto net = network_to_json(build_rshv1());
            net["gamma"]["O.O"] = -1.0;
            std::ofstream(dir.path / "net.json") << net.dump();
            const auto cfg = write_config(dir.path, R"({"network_file": "net.json", "fixpoint": {"rho": 0.05}})");
            const auto r = run({"fixpoint", "--config", cfg.string(), "--out", (dir.path / "o").string()});
            CHECK(r.code == 1);
        }
        SUBCASE("missing block and unknown subcommand")
        {
            const auto cfg = write_config(dir.path, R"({"network_file": ")" + (kData / "rshv1.json").string() + R"("})");
            CHECK(run({"margin", "--config", cfg.string(), "--out", (dir.path / "o").string()}).code == 1);
            CHECK(run({"frobnicate"}).code == 1);
        }
    }
}
