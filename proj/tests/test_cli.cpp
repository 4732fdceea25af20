#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// End-to-end checks of the command-line surface, driving the built binary.

namespace fs = std::filesystem;

namespace {

const std::string kBin = REHABCL_BIN;

int run(const std::string& args) {
    std::string cmd = kBin + " " + args + " >/dev/null 2>/dev/null";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path workspace() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "rehabcl_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string strip_seconds(const fs::path& jsonl) {
    std::ifstream in(jsonl);
    std::stringstream out;
    std::string line;
    while (std::getline(in, line)) {
        auto pos = line.find(",\"seconds\":");
        if (pos != std::string::npos) line.erase(pos, line.find('}', pos) - pos);
        out << line << "\n";
    }
    return out.str();
}

}  // namespace

TEST_CASE("cli end-to-end pipeline") {
    fs::path ws = workspace();
    fs::path data = ws / "data";
    REQUIRE(run("synth --out " + data.string() + " --types 2 --samples-per-type 8 --frames 16 --seed 3") ==
            0);
    REQUIRE(fs::exists(data / "meta.json"));
    REQUIRE(fs::exists(data / "manifest.jsonl"));

    // prepare refuses to clobber without --force (canonical -> canonical copy).
    fs::path prep = ws / "prep";
    CHECK(run("prepare --dataset canonical --root " + data.string() + " --out " + prep.string() +
              " --target-frames 16") == 0);
    CHECK(run("prepare --dataset canonical --root " + data.string() + " --out " + prep.string() +
              " --target-frames 16") == 2);
    CHECK(run("prepare --dataset canonical --root " + data.string() + " --out " + prep.string() +
              " --target-frames 16 --force") == 0);

    // missing root -> exit 2
    CHECK(run("prepare --dataset uiprmd --root /no/such/root --out " + (ws / "x").string()) == 2);
    // unknown dataset kind -> exit 2
    CHECK(run("prepare --dataset bogus --root " + data.string() + " --out " + (ws / "y").string()) == 2);

    // train twice with the same seed: logs identical modulo the seconds field
    fs::path run_a = ws / "run_a", run_b = ws / "run_b";
    std::string train_args = " --data " + prep.string() +
                             " --epochs 3 --batch 4 --lr 0.003 --seed 7";
    REQUIRE(run("train --out " + run_a.string() + train_args) == 0);
    REQUIRE(run("train --out " + run_b.string() + train_args) == 0);
    REQUIRE(fs::exists(run_a / "model.ckpt"));
    REQUIRE(fs::exists(run_a / "resolved_config.json"));
    CHECK(strip_seconds(run_a / "train_log.jsonl") == strip_seconds(run_b / "train_log.jsonl"));

    // calibrate -> refs json
    fs::path refs = ws / "refs.json";
    REQUIRE(run("calibrate --checkpoint " + (run_a / "model.ckpt").string() + " --data " + prep.string() +
                " --out " + refs.string()) == 0);
    REQUIRE(fs::exists(refs));

    // infer -> predictions
    fs::path preds = ws / "preds.jsonl";
    REQUIRE(run("infer --checkpoint " + (run_a / "model.ckpt").string() + " --refs " + refs.string() +
                " --data " + prep.string() + " --out " + preds.string()) == 0);
    std::ifstream pin(preds);
    long lines = 0;
    std::string line;
    while (std::getline(pin, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 16);

    // eval with protocol orchestration
    fs::path eval_dir = ws / "eval";
    REQUIRE(run("eval --checkpoint " + (run_a / "model.ckpt").string() + " --data " + prep.string() +
                " --protocol ratio_3_1 --seed 5 --out " + eval_dir.string()) == 0);
    CHECK(fs::exists(eval_dir / "report.json"));
    CHECK(fs::exists(eval_dir / "report.txt"));

    // embed with projection + plot
    fs::path emb = ws / "emb.tsv";
    REQUIRE(run("embed --checkpoint " + (run_a / "model.ckpt").string() + " --data " + prep.string() +
                " --out " + emb.string() + " --project --perplexity 5 --refs " + refs.string()) == 0);
    REQUIRE(fs::exists(emb));
    fs::path fig = ws / "proj.svg";
    REQUIRE(run("plot --embeddings " + emb.string() + " --out " + fig.string()) == 0);
    CHECK(fs::exists(fig));
    fs::path loss_fig = ws / "loss.svg";
    REQUIRE(run("plot --log " + (run_a / "train_log.jsonl").string() + " --out " + loss_fig.string()) ==
            0);
    CHECK(fs::exists(loss_fig));

    // transfer on a regression synth set
    fs::path reg = ws / "reg";
    REQUIRE(run("synth --out " + reg.string() +
                " --regression --samples-per-type 10 --frames 16 --seed 4") == 0);
    fs::path tdir = ws / "transfer";
    REQUIRE(run("transfer --checkpoint " + (run_a / "model.ckpt").string() + " --data " + reg.string() +
                " --out " + tdir.string() + " --epochs 3 --batch 4 --seed 2") == 0);
    CHECK(fs::exists(tdir / "model.ckpt"));
    CHECK(fs::exists(tdir / "transfer_log.jsonl"));

    // machine-readable errors
    std::string cmd = kBin + " --error-json eval --checkpoint /missing.ckpt --data " + prep.string() +
                      " --protocol ratio_3_1 --out " + (ws / "e2").string() + " 2> " +
                      (ws / "err.json").string() + " >/dev/null";
    int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) != 0);
    std::ifstream err(ws / "err.json");
    std::string err_line;
    std::getline(err, err_line);
    CHECK(err_line.find("\"error\"") != std::string::npos);
}
