#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "fedtilt/config.hpp"
#include "fedtilt/runner.hpp"

using namespace fedtilt;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* env = std::getenv("FEDTILT_CLI");
    REQUIRE_MESSAGE(env != nullptr, "FEDTILT_CLI must point at the fedtilt binary");
    return env;
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "fedtilt_cli_test";
    fs::create_directories(dir);
    return dir;
}

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CommandResult run_cli(const std::string& args) {
    const fs::path out_file = work_dir() / "stdout.txt";
    const fs::path err_file = work_dir() / "stderr.txt";
    const std::string cmd = cli_path() + " " + args + " > " + out_file.string() + " 2> " +
                            err_file.string();
    const int status = std::system(cmd.c_str());

    CommandResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    result.out = slurp(out_file);
    result.err = slurp(err_file);
    return result;
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

}  // namespace

TEST_CASE("config parsing: happy path, overrides, and failures") {
    const auto map = parse_config_text(
        "# comment\n"
        "dataset = \"toy2\"\n"
        "rounds = 4   # trailing comment\n"
        "tau = 100\n"
        "lambda = 10\n");
    const auto cfg = ExperimentConfig::from_map(map);
    CHECK(cfg.dataset == DatasetKind::Toy2);
    CHECK(cfg.run.global_rounds == 4);
    CHECK(cfg.run.tilt.tau == 100.0);

    ConfigMap overridden = map;
    apply_override(overridden, "rounds=9");
    CHECK(ExperimentConfig::from_map(overridden).run.global_rounds == 9);

    CHECK_THROWS_AS(parse_config_text("rounds 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[section]\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_map(parse_config_text("no_such_key = 1\n")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_map(parse_config_text("rounds = abc\n")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_map(parse_config_text("dataset = \"mars\"\n")),
                    ConfigError);
    CHECK_THROWS_AS(apply_override(overridden, "novalue"), ConfigError);

    // identical configs hash alike, different ones do not
    const auto cfg2 = ExperimentConfig::from_map(map);
    CHECK(cfg.config_hash() == cfg2.config_hash());
    CHECK(cfg.config_hash() != ExperimentConfig::from_map(overridden).config_hash());
}

TEST_CASE("missing config file exits 1 and names the path") {
    const auto result = run_cli("run --config /no/such/config.toml");
    CHECK(result.exit_code == 1);
    CHECK(result.err.find("/no/such/config.toml") != std::string::npos);
}

TEST_CASE("invalid config contents exit 1") {
    const fs::path cfg = work_dir() / "broken.toml";
    write_file(cfg, "definitely not = = valid\nrounds = 3\n");
    const auto result = run_cli("run --config " + cfg.string());
    CHECK(result.exit_code == 1);

    write_file(cfg, "unknown_knob = 3\n");
    CHECK(run_cli("run --config " + cfg.string()).exit_code == 1);
}

TEST_CASE("toy run emits the documented CSV shape and a summary") {
    const fs::path out = work_dir() / "toy1";
    const auto result =
        run_cli("toy 1 --seed 5 --out " + out.string() + " --set rounds=4");
    REQUIRE(result.exit_code == 0);

    const auto csv = lines_of(read_file(out / "rounds.csv"));
    REQUIRE(csv.size() == 5);  // header + T rows
    CHECK(csv[0] == kRoundsCsvHeader);
    CHECK(csv[1].rfind("1,", 0) == 0);
    CHECK(csv[4].rfind("4,", 0) == 0);

    const auto summary = nlohmann::json::parse(read_file(out / "summary.json"));
    CHECK(summary["seed"] == 5);
    CHECK(summary.contains("config_hash"));
    CHECK(summary.contains("wall_time_seconds"));
    CHECK(summary["config"]["dataset"] == "toy1");
    CHECK(summary["config"]["lambda"] == "1");
    CHECK(summary["final"]["mean_acc_personalized"].is_number());
}

TEST_CASE("repeated runs with the same seed produce byte-identical CSVs") {
    const fs::path a = work_dir() / "det_a";
    const fs::path b = work_dir() / "det_b";
    REQUIRE(run_cli("toy 1 --seed 11 --out " + a.string() + " --set rounds=3").exit_code == 0);
    REQUIRE(run_cli("toy 1 --seed 11 --out " + b.string() + " --set rounds=3").exit_code == 0);
    CHECK(read_file(a / "rounds.csv") == read_file(b / "rounds.csv"));

    const fs::path c = work_dir() / "det_c";
    REQUIRE(run_cli("toy 1 --seed 12 --out " + c.string() + " --set rounds=3").exit_code == 0);
    CHECK(read_file(a / "rounds.csv") != read_file(c / "rounds.csv"));
}

TEST_CASE("run command executes a config file with overrides and baselines") {
    const fs::path cfg = work_dir() / "run.toml";
    write_file(cfg,
               "dataset = \"toy1\"\n"
               "rounds = 3\n"
               "client_epochs = 2\n"
               "lr_client = 0.1\n"
               "lr_personal = 0.1\n"
               "tau = 1\n"
               "lambda = 1\n"
               "seed = 3\n");
    const fs::path out = work_dir() / "run_out";
    REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out.string())
                .exit_code == 0);
    CHECK(lines_of(read_file(out / "rounds.csv")).size() == 4);

    const fs::path out_avg = work_dir() / "run_fedavg";
    const auto avg = run_cli("run --config " + cfg.string() + " --baseline fedavg --out " +
                             out_avg.string());
    REQUIRE(avg.exit_code == 0);
    const auto summary = nlohmann::json::parse(read_file(out_avg / "summary.json"));
    CHECK(summary["config"]["method"] == "fedavg");

    // --set wins over the file
    const fs::path out_set = work_dir() / "run_set";
    REQUIRE(run_cli("run --config " + cfg.string() + " --set rounds=2 --out " +
                    out_set.string())
                .exit_code == 0);
    CHECK(lines_of(read_file(out_set / "rounds.csv")).size() == 3);
}

TEST_CASE("sweep emits one row per grid cell and matches the single run") {
    const fs::path cfg = work_dir() / "sweep.toml";
    write_file(cfg,
               "dataset = \"toy1\"\n"
               "rounds = 2\n"
               "client_epochs = 1\n"
               "lr_client = 0.1\n"
               "lr_personal = 0.1\n"
               "seed = 7\n");

    const fs::path grid_out = work_dir() / "sweep_grid";
    REQUIRE(run_cli("sweep --config " + cfg.string() +
                    " --lambda-grid -1,0,1 --tau-grid 0,1,2 --out " + grid_out.string())
                .exit_code == 0);
    const auto grid_csv = lines_of(read_file(grid_out / "sweep.csv"));
    REQUIRE(grid_csv.size() == 10);  // header + 9 cells
    CHECK(grid_csv[0] == std::string("lambda,tau,") + kRoundsCsvHeader);

    // a 1x1 sweep reproduces the plain run's final round verbatim
    const fs::path cell_out = work_dir() / "sweep_cell";
    REQUIRE(run_cli("sweep --config " + cfg.string() +
                    " --lambda-grid 1 --tau-grid 1 --out " + cell_out.string())
                .exit_code == 0);
    const fs::path run_out = work_dir() / "sweep_run";
    REQUIRE(run_cli("run --config " + cfg.string() +
                    " --set lambda=1 --set tau=1 --out " + run_out.string())
                .exit_code == 0);
    const auto cell = lines_of(read_file(cell_out / "sweep.csv")).back();
    const auto final_row = lines_of(read_file(run_out / "rounds.csv")).back();
    CHECK(cell == "1,1," + final_row);

    CHECK(run_cli("sweep --config " + cfg.string() + " --lambda-grid abc").exit_code == 1);
}

TEST_CASE("runtime failures exit 2") {
    const fs::path cfg = work_dir() / "idx_missing.toml";
    write_file(cfg,
               "dataset = \"idx\"\n"
               "idx_images = \"/no/such/images.idx\"\n"
               "idx_labels = \"/no/such/labels.idx\"\n"
               "rounds = 1\n");
    const auto result = run_cli("run --config " + cfg.string());
    CHECK(result.exit_code == 2);
    CHECK(result.err.find("/no/such/images.idx") != std::string::npos);
}

TEST_CASE("worker thread count does not change results") {
    const fs::path cfg = work_dir() / "threads.toml";
    write_file(cfg,
               "dataset = \"blobs\"\n"
               "blob_classes = 4\n"
               "blob_per_class = 80\n"
               "blob_dim = 4\n"
               "num_clients = 8\n"
               "participation = 0.5\n"
               "rounds = 3\n"
               "client_epochs = 2\n"
               "tau = 5\n"
               "lambda = 5\n"
               "seed = 6\n");
    const fs::path one = work_dir() / "threads_one";
    const fs::path many = work_dir() / "threads_many";
    const std::string base = cli_path() + " run --config " + cfg.string() + " --out ";
    REQUIRE(std::system(("FEDTILT_THREADS=1 " + base + one.string() + " > /dev/null 2>&1")
                            .c_str()) == 0);
    REQUIRE(std::system(("FEDTILT_THREADS=4 " + base + many.string() + " > /dev/null 2>&1")
                            .c_str()) == 0);
    CHECK(read_file(one / "rounds.csv") == read_file(many / "rounds.csv"));
}

TEST_CASE("verify passes on a pristine build and fails loudly on a broken gradient") {
    const auto good = run_cli("verify --seed 99");
    REQUIRE(good.exit_code == 0);
    const auto good_lines = lines_of(good.out);
    int check_lines = 0;
    for (const auto& line : good_lines)
        if (line.find("PASS") != std::string::npos) ++check_lines;
    CHECK(check_lines >= 6);

    const auto broken = run_cli("verify --seed 99 --inject-gradient-fault");
    CHECK(broken.exit_code == 3);
    CHECK(broken.err.find("tilt-gradient-finite-diff") != std::string::npos);
    CHECK(broken.out.find("FAIL") != std::string::npos);
}

TEST_CASE("toy 3 sweep: negative lambda beats positive lambda under outliers") {
    const fs::path out = work_dir() / "toy3_sweep";
    const fs::path cfg = work_dir() / "toy3.toml";
    write_file(cfg,
               "dataset = \"toy3\"\n"
               "rounds = 100\n"
               "client_epochs = 5\n"
               "batch_size = 10\n"
               "lr_client = 0.1\n"
               "lr_personal = 0.1\n"
               "outlier = \"gaussian\"\n"
               "outlier_std = 0.15\n"
               "outlier_sample_fraction = 0.1\n"
               "outlier_target_class = 0\n"
               "seed = 42\n");
    REQUIRE(run_cli("sweep --config " + cfg.string() +
                    " --lambda-grid -100,100 --tau-grid 1 --out " + out.string())
                .exit_code == 0);
    const auto rows = lines_of(read_file(out / "sweep.csv"));
    REQUIRE(rows.size() == 3);

    auto acc_of = [](const std::string& row) {
        // third column: mean_acc_personalized
        std::stringstream ss(row);
        std::string field;
        for (int i = 0; i < 4; ++i) std::getline(ss, field, ',');
        return std::stod(field);
    };
    const double negative = acc_of(rows[1]);
    const double positive = acc_of(rows[2]);
    CHECK(negative >= positive);
}
