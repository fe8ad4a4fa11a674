#include <cmath>

#include "doctest.h"
#include "json.hpp"

#include "famlab/bundle.hpp"
#include "famlab/fileio.hpp"
#include "famlab/npy.hpp"
#include "famlab/scoring.hpp"
#include "support/cli.hpp"
#include "support/fixtures.hpp"

using namespace famlab;
using famlab::testing::make_bundle;
using famlab::testing::rows;
using famlab::testing::run_cli;
using famlab::testing::scratch_dir;
using famlab::testing::snapshot;
using famlab::testing::vec;
namespace fs = std::filesystem;

namespace {

struct Workspace {
    fs::path root;
    fs::path manifest;
};

/// Seed-7 bundle shrunk to keep the CLI runs fast.
Workspace small_synth(const std::string& name) {
    Workspace ws{scratch_dir(name), {}};
    write_file_atomic(ws.root / "spec.json", R"({"n_known": 120, "n_novel": 80})");
    const auto r = run_cli("synth --spec '" + (ws.root / "spec.json").string() + "' --out '" + (ws.root / "bundle").string() + "'",
                           ws.root);
    REQUIRE(r.status == 0);
    ws.manifest = ws.root / "bundle" / "manifest.json";
    return ws;
}

std::vector<double> read_scores(const fs::path& p) { return npy::to_doubles(npy::read(p), "scores"); }

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

}  // namespace

TEST_CASE("synth writes a bundle whose digest is reported") {
    const auto ws = small_synth("cli_synth");
    const auto j = read_json(ws.root / "bundle" / "synth.json");
    CHECK(j["sha256"] == bundle_digest(ws.manifest));
    CHECK(j["spec"]["n_known"] == 120);
    CHECK(read_bundle(ws.manifest).images() == 200);
}

TEST_CASE("synth rejects an infeasible spec") {
    auto dir = scratch_dir("cli_infeasible");
    write_file_atomic(dir / "spec.json", R"({"K": 6, "features_per_class": 6, "D": 32})");
    const auto r = run_cli("synth --spec '" + (dir / "spec.json").string() + "' --out '" + (dir / "o").string() + "'", dir);
    CHECK(r.status == 2);
    CHECK(r.err.find("infeasible spec") != std::string::npos);
}

TEST_CASE("score writes a 1-D score file and sidecar") {
    const auto ws = small_synth("cli_score");
    const auto r = run_cli("score --bundle '" + ws.manifest.string() + "' --out '" + (ws.root / "s").string() + "'", ws.root);
    REQUIRE(r.status == 0);
    const auto arr = npy::read(ws.root / "s" / "scores.npy");
    CHECK(arr.header.shape == std::vector<std::size_t>{200});
    const auto scores = read_scores(ws.root / "s" / "scores.npy");
    const auto direct = scoring::max_logit_score(read_bundle(ws.manifest)).scores;
    for (std::size_t i = 0; i < scores.size(); ++i) CHECK(scores[i] == direct(static_cast<Eigen::Index>(i)));
    const auto j = read_json(ws.root / "s" / "scores.json");
    CHECK(j["method"] == "maxlogit");
    CHECK(j["orientation"].is_string());
    CHECK(j["params"]["keep_fraction"] == 0.10);
}

TEST_CASE("dice with keep fraction 1 ranks like the full-logit energy") {
    const auto ws = small_synth("cli_dice");
    const auto r = run_cli("score --bundle '" + ws.manifest.string() + "' --method dice --keep-fraction 1.0 --out '" +
                               (ws.root / "s").string() + "'",
                           ws.root);
    REQUIRE(r.status == 0);
    const auto scores = read_scores(ws.root / "s" / "scores.npy");
    const Matrix l = scoring::logits(read_bundle(ws.manifest));
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        const double m = l.row(i).maxCoeff();
        const double e = -(m + std::log((l.row(i).array() - m).exp().sum()));
        CHECK(std::abs(scores[static_cast<std::size_t>(i)] - e) <= 1e-12);
    }
}

TEST_CASE("mahalanobis on a singleton class exits with the sample-count error") {
    auto dir = scratch_dir("cli_maha");
    const Bundle b = make_bundle(rows({{1, 0}, {2, 1}, {0, 1}, {3, 3}}), rows({{1, 0}, {0, 1}}), vec({0, 0}), {0, 0, 1, -1});
    const auto manifest = write_bundle(b, dir / "b");
    const auto r = run_cli("score --bundle '" + manifest.string() + "' --method mahalanobis --out '" + (dir / "s").string() + "'", dir);
    CHECK(r.status == 2);
    CHECK(r.err.find("class with < 2 samples") != std::string::npos);
}

TEST_CASE("exit codes for I/O and usage errors") {
    auto dir = scratch_dir("cli_exit");
    CHECK(run_cli("score --bundle '" + (dir / "missing.json").string() + "' --out '" + (dir / "s").string() + "'", dir).status == 3);
    CHECK(run_cli("score --out x", dir).status == 2);
    CHECK(run_cli("frobnicate", dir).status == 2);
}

TEST_CASE("eval on a separated bundle and with replications") {
    auto dir = scratch_dir("cli_eval");
    const Bundle sep = make_bundle(rows({{5, 0}, {0, 5}, {6, 0}, {0, 6}, {0.1, 0.1}, {0.2, 0}, {0, 0.3}}), rows({{1, 0}, {0, 1}}),
                                   vec({0, 0}), {0, 1, 0, 1, -1, -1, -1});
    const auto manifest = write_bundle(sep, dir / "b");
    auto r = run_cli("eval --bundle '" + manifest.string() + "' --seed 1 --resamples 50 --out '" + (dir / "e").string() + "'", dir);
    REQUIRE(r.status == 0);
    const auto j = read_json(dir / "e" / "roc.json");
    CHECK(j["auroc"] == 1.0);
    CHECK(j["ci_low"] == 1.0);
    CHECK(fs::exists(dir / "e" / "roc.csv"));
    CHECK(fs::exists(dir / "e" / "roc.csv.json"));
    CHECK_FALSE(fs::exists(dir / "e" / "accuracy.csv"));  // three novel images are too few to smooth

    r = run_cli("eval --bundle '" + manifest.string() + "' --resamples 50 --out '" + (dir / "e2").string() + "'", dir);
    CHECK(r.status == 2);
    CHECK(r.err.find("seed") != std::string::npos);

    std::string bundles;
    for (int s = 1; s <= 5; ++s) {
        const auto out = dir / ("syn" + std::to_string(s));
        write_file_atomic(dir / "spec.json", R"({"n_known": 60, "n_novel": 60, "noise_sd": 0.009})");
        REQUIRE(run_cli("synth --spec '" + (dir / "spec.json").string() + "' --seed " + std::to_string(s) + " --out '" + out.string() + "'",
                        dir)
                    .status == 0);
        bundles += " '" + (out / "manifest.json").string() + "'";
    }
    r = run_cli("eval --bundle" + bundles + " --replications --resamples 0 --out '" + (dir / "rep").string() + "'", dir);
    REQUIRE(r.status == 0);
    const auto rep = read_json(dir / "rep" / "replications.json");
    CHECK(rep.contains("mean"));
    CHECK(rep.contains("sd"));
    CHECK(rep["values"].size() == 5);
    CHECK(rep["sd"].get<double>() >= 0);
}

TEST_CASE("eval occlusion mode lowers AUROC on a zero-retention bundle") {
    const auto ws = small_synth("cli_occl");
    REQUIRE(run_cli("eval --bundle '" + ws.manifest.string() + "' --resamples 0 --out '" + (ws.root / "plain").string() + "'", ws.root)
                .status == 0);
    REQUIRE(run_cli("eval --bundle '" + ws.manifest.string() + "' --resamples 0 --known-activations blurred --out '" +
                        (ws.root / "blur").string() + "'",
                    ws.root)
                .status == 0);
    const double plain = read_json(ws.root / "plain" / "roc.json")["auroc"];
    const double blur = read_json(ws.root / "blur" / "roc.json")["auroc"];
    CHECK(blur < plain);
}

TEST_CASE("familiarity outputs match the generator ground truth") {
    const auto ws = small_synth("cli_fam");
    const auto r = run_cli("familiarity --bundle '" + ws.manifest.string() + "' --out '" + (ws.root / "f").string() + "'", ws.root);
    REQUIRE(r.status == 0);
    const auto tax = read_file(ws.root / "f" / "taxonomy.csv");
    std::stringstream ss(tax);
    std::string line;
    std::getline(ss, line);
    CHECK(line == "feature,class,oo,weight,type");
    std::size_t rows_seen = 0;
    while (std::getline(ss, line)) {
        std::stringstream ls(line);
        std::string f, k, oo, w, type;
        std::getline(ls, f, ',');
        std::getline(ls, k, ',');
        std::getline(ls, oo, ',');
        std::getline(ls, w, ',');
        std::getline(ls, type, ',');
        const int fi = std::stoi(f), ki = std::stoi(k);
        const bool presence = fi / 6 == ki && fi < 24;
        CHECK(type == (presence ? "positive_presence" : "neutral"));
        ++rows_seen;
    }
    CHECK(rows_seen == 32 * 4);
    const auto dec = read_file(ws.root / "f" / "decomposition.csv");
    CHECK(dec.substr(0, dec.find('\n')) == "image,class,max_logit,pp,na,pa,np,neutral");
    CHECK(std::count(dec.begin(), dec.end(), '\n') == 81);
    CHECK(fs::exists(ws.root / "f" / "decomposition.csv.json"));

    auto dir = scratch_dir("cli_fam_noblur");
    Bundle b = make_bundle(rows({{1, 0}, {2, 1}, {0, 1}, {0, 2}, {1, 1}}), rows({{1, 0}, {0, 1}}), vec({0, 0}), {0, 0, 1, 1, -1});
    const auto m = write_bundle(b, dir / "b");
    const auto nr = run_cli("familiarity --bundle '" + m.string() + "' --out '" + (dir / "f").string() + "'", dir);
    CHECK(nr.status == 2);
    CHECK(nr.err.find("z_blur") != std::string::npos);
}

TEST_CASE("familiarity with full retention is all neutral") {
    auto dir = scratch_dir("cli_fam_ret");
    write_file_atomic(dir / "spec.json", R"({"n_known": 80, "n_novel": 40, "blur_retention": 1.0})");
    REQUIRE(run_cli("synth --spec '" + (dir / "spec.json").string() + "' --out '" + (dir / "b").string() + "'", dir).status == 0);
    REQUIRE(run_cli("familiarity --bundle '" + (dir / "b" / "manifest.json").string() + "' --out '" + (dir / "f").string() + "'", dir)
                .status == 0);
    const auto tax = read_file(dir / "f" / "taxonomy.csv");
    CHECK(tax.find("presence") == std::string::npos);
    CHECK(tax.find("absence") == std::string::npos);
}

TEST_CASE("activations outputs") {
    const auto ws = small_synth("cli_acts");
    const auto r = run_cli("activations --bundle '" + ws.manifest.string() + "' --q 0 --contribution-class 1 --out '" +
                               (ws.root / "a").string() + "'",
                           ws.root);
    REQUIRE(r.status == 0);
    const auto curve = read_file(ws.root / "a" / "activation_curve.csv");
    std::size_t known_rows = 0, novel_rows = 0;
    std::stringstream ss(curve);
    std::string line;
    std::getline(ss, line);
    double known_at_1 = -1, novel_at_1 = -1;
    while (std::getline(ss, line)) {
        const bool known = line.find(",known,") != std::string::npos;
        (known ? known_rows : novel_rows)++;
        if (line.find(",1,") != std::string::npos) {
            const double v = std::stod(line.substr(line.rfind(',') + 1));
            (known ? known_at_1 : novel_at_1) = v;
        }
    }
    CHECK(known_rows == 21);
    CHECK(novel_rows == 21);
    CHECK(known_at_1 >= novel_at_1);
    const auto hist = read_file(ws.root / "a" / "histogram.csv");
    std::stringstream hs(hist);
    std::getline(hs, line);
    std::size_t features = 0;
    while (std::getline(hs, line)) {
        CHECK(line.substr(line.rfind(',') + 1) == "1");
        ++features;
    }
    CHECK(features == 32);
    CHECK(fs::exists(ws.root / "a" / "contribution_curve.csv"));
}

TEST_CASE("lowess subcommand") {
    auto dir = scratch_dir("cli_lowess");
    std::string csv = "x,y\n";
    for (int i = 0; i < 10; ++i) csv += std::to_string(i) + "," + std::to_string(2 * i + 1) + "\n";
    write_file_atomic(dir / "in.csv", csv);
    REQUIRE(run_cli("lowess --input '" + (dir / "in.csv").string() + "' --output '" + (dir / "out.csv").string() +
                        "' --f 0.5 --iterations 0",
                    dir)
                .status == 0);
    const auto out = read_file(dir / "out.csv");
    CHECK(out.substr(0, out.find('\n')) == "x,y,fitted");
    CHECK(out.find("4,9,9\n") != std::string::npos);
    CHECK(fs::exists(dir / "out.csv.json"));
}
