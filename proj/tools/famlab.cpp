// famlab: command-line front end for novelty scoring, evaluation and the
// familiarity diagnostics.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "famlab/activity.hpp"
#include "famlab/bundle.hpp"
#include "famlab/error.hpp"
#include "famlab/eval.hpp"
#include "famlab/familiarity.hpp"
#include "famlab/fileio.hpp"
#include "famlab/numerics.hpp"
#include "famlab/report.hpp"
#include "famlab/scoring.hpp"
#include "famlab/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using famlab::report::Csv;
using famlab::report::format_double;

namespace {

constexpr const char* kOrientation = "higher = more novel";

struct RunConfig {
    std::vector<std::string> bundles;
    std::string fit_bundle;
    std::string scores_path;
    std::string method = "maxlogit";
    std::string reference = "ground_truth";
    std::string known_activations = "plain";
    double keep_fraction = 0.10;
    double ridge_scale = 1e-6;
    double threshold = 0.02;
    std::string thetas = "0:5:0.25";
    std::string contribution_thetas;
    int contribution_class = -1;
    std::string contribution_reference = "predicted";
    double q = 0.60;
    double f = 0.25;
    int iterations = 3;
    double id_fpr = 0.05;
    std::int64_t seed = -1;
    int resamples = 1000;
    bool replications = false;
    bool include_known = false;
    std::string spec_path;
    std::string input;
    std::string output;
    std::string out;
};

famlab::Reference parse_reference(const std::string& text) {
    if (text == "ground_truth") return famlab::Reference::ground_truth;
    if (text == "predicted") return famlab::Reference::predicted;
    throw famlab::ValidationError("unknown reference \"" + text + "\" (expected ground_truth or predicted)");
}

std::vector<double> parse_thetas(const std::string& text) {
    const auto number = [](const std::string& token) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (...) {
            used = 0;
        }
        if (used != token.size() || token.empty()) throw famlab::ValidationError("thetas: bad number \"" + token + "\"");
        return v;
    };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
        if (parts.size() != 3) throw famlab::ValidationError("thetas: expected start:stop:step");
        return famlab::activity::theta_grid(number(parts[0]), number(parts[1]), number(parts[2]));
    }
    std::vector<double> out;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');) out.push_back(number(part));
    if (out.empty()) throw famlab::ValidationError("thetas: empty grid");
    return out;
}

fs::path prepare_out(const RunConfig& config) {
    if (config.out.empty()) throw famlab::ValidationError("--out is required");
    const fs::path dir(config.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw famlab::IoError("cannot create output directory " + dir.string());
    return dir;
}

famlab::scoring::ScoreParams score_params(const RunConfig& config) {
    famlab::scoring::ScoreParams params;
    params.method = famlab::scoring::parse_method(config.method);
    params.keep_fraction = config.keep_fraction;
    params.ridge_scale = config.ridge_scale;
    params.reference = parse_reference(config.reference);
    return params;
}

json score_params_json(const RunConfig& config) {
    return {{"method", config.method},
            {"keep_fraction", config.keep_fraction},
            {"ridge_scale", config.ridge_scale},
            {"reference", config.reference},
            {"known_activations", config.known_activations}};
}

std::span<const double> as_span(const famlab::Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

std::vector<double> to_std(const famlab::Vector& v) { return {v.data(), v.data() + v.size()}; }

// Scores `bundle` (plain or with blurred known rows) with the model fitted on
// `fit` (defaults to the unmodified bundle).
famlab::scoring::NoveltyScores compute_scores(const famlab::Bundle& bundle, const RunConfig& config) {
    const auto params = score_params(config);
    famlab::Bundle fit = config.fit_bundle.empty() ? bundle : famlab::read_bundle(config.fit_bundle);
    if (config.known_activations == "plain") return famlab::scoring::score(fit, bundle, params);
    if (config.known_activations == "blurred")
        return famlab::scoring::score(fit, famlab::with_blurred_known(bundle), params);
    throw famlab::ValidationError("unknown --known-activations \"" + config.known_activations + "\"");
}

json roc_json(const famlab::eval::RocResult& roc) {
    json j = {{"auroc", roc.auroc}, {"n_known", roc.n_known}, {"n_novel", roc.n_novel}};
    if (roc.ci_low) j["ci_low"] = *roc.ci_low;
    if (roc.ci_high) j["ci_high"] = *roc.ci_high;
    json curve = json::array();
    for (const auto& p : roc.curve) curve.push_back({p.fpr, p.tpr});
    j["curve"] = curve;
    return j;
}

Csv roc_csv(const famlab::eval::RocResult& roc) {
    Csv csv({"fpr", "tpr"});
    for (const auto& p : roc.curve) csv.row({format_double(p.fpr), format_double(p.tpr)});
    return csv;
}

famlab::report::Plot roc_plot(const famlab::eval::RocResult& roc, const std::string& title) {
    famlab::report::Series s{"AUROC " + format_double(std::round(roc.auroc * 1e4) / 1e4), "#1f77b4"};
    for (const auto& p : roc.curve) {
        s.x.push_back(p.fpr);
        s.y.push_back(p.tpr);
    }
    s.line = true;
    famlab::report::Series diag{"", "#bbbbbb", {0.0, 1.0}, {0.0, 1.0}, true};
    return {title, "false positive rate (known)", "true positive rate (novel)", "", {diag, s}};
}

// ---------------------------------------------------------------------------

int cmd_score(const RunConfig& config) {
    if (config.bundles.size() != 1) throw famlab::ValidationError("score: exactly one --bundle is required");
    const auto out = prepare_out(config);
    const auto bundle = famlab::read_bundle(config.bundles[0]);
    const auto scores = compute_scores(bundle, config);

    famlab::npy::write(out / "scores.npy", famlab::npy::from_doubles(as_span(scores.scores)));
    std::vector<double> known, novel;
    for (Eigen::Index i = 0; i < bundle.images(); ++i) (bundle.is_known(i) ? known : novel).push_back(scores.scores(i));
    const auto mean = [](const std::vector<double>& v) {
        return v.empty() ? json(nullptr) : json(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
    };
    json params = score_params_json(config);
    params["bundle"] = config.bundles[0];
    if (!config.fit_bundle.empty()) params["fit_bundle"] = config.fit_bundle;
    const json summary = {{"method", famlab::scoring::to_string(scores.method)},
                          {"orientation", kOrientation},
                          {"params", params},
                          {"n", bundle.images()},
                          {"n_known", known.size()},
                          {"n_novel", novel.size()},
                          {"mean_known", mean(known)},
                          {"mean_novel", mean(novel)}};
    famlab::report::write_json(out / "scores.json", summary);
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_eval(const RunConfig& config) {
    if (config.bundles.empty()) throw famlab::ValidationError("eval: at least one --bundle is required");
    if (config.bundles.size() > 1 && !config.replications)
        throw famlab::ValidationError("eval: several bundles require --replications");
    if (!config.scores_path.empty() && config.bundles.size() != 1)
        throw famlab::ValidationError("eval: --scores pairs with exactly one --bundle");
    if (config.resamples > 0 && config.seed < 0) throw famlab::ValidationError("eval: --seed is required for bootstrap resampling");
    const auto out = prepare_out(config);

    json params = score_params_json(config);
    params["bundles"] = config.bundles;
    if (!config.scores_path.empty()) params["scores"] = config.scores_path;
    if (!config.fit_bundle.empty()) params["fit_bundle"] = config.fit_bundle;
    params["resamples"] = config.resamples;
    params["seed"] = config.seed;
    params["id_fpr"] = config.id_fpr;
    params["f"] = config.f;
    const json audit = {{"subcommand", "eval"}, {"params", params}};

    std::vector<double> values;
    json results = json::array();
    for (std::size_t r = 0; r < config.bundles.size(); ++r) {
        const auto bundle = famlab::read_bundle(config.bundles[r]);
        std::vector<double> scores;
        if (!config.scores_path.empty()) {
            scores = famlab::npy::to_doubles(famlab::npy::read(config.scores_path), "scores");
            if (scores.size() != static_cast<std::size_t>(bundle.images()))
                throw famlab::ValidationError("scores: length does not match bundle N");
        } else {
            scores = to_std(compute_scores(bundle, config).scores);
        }
        const auto roc = config.resamples > 0
                             ? famlab::eval::bootstrap_ci(scores, bundle.groups, config.resamples,
                                                          static_cast<std::uint64_t>(config.seed))
                             : famlab::eval::auroc(scores, bundle.groups);
        values.push_back(roc.auroc);

        const std::string stem = config.bundles.size() == 1 ? "roc" : "roc_" + std::to_string(r);
        json rj = roc_json(roc);
        rj["bundle"] = bundle.name;
        rj["method"] = config.scores_path.empty() ? config.method : "file";
        rj["orientation"] = kOrientation;
        famlab::report::write_json(out / (stem + ".json"), rj);
        famlab::report::write_csv(out / (stem + ".csv"), roc_csv(roc), audit);
        famlab::report::write_svg(out / (stem + ".svg"), roc_plot(roc, "ROC: " + bundle.name));

        const auto n_novel = static_cast<double>(bundle.count_novel());
        if (n_novel >= 3 && std::ceil(config.f * n_novel - 1e-9) >= 2) {
            const auto curve = famlab::eval::accuracy_curve(scores, bundle.groups, config.id_fpr, config.f, config.iterations);
            Csv csv({"rank", "image", "score", "raw_accuracy", "smoothed_accuracy"});
            famlab::report::Series raw{"raw", "#999999"}, smooth{"LOWESS f=" + format_double(config.f), "#000000"};
            smooth.line = true;
            for (const auto& p : curve.points) {
                csv.row({std::to_string(p.rank), std::to_string(p.image), format_double(p.score), format_double(p.raw),
                         format_double(p.smoothed)});
                raw.x.push_back(static_cast<double>(p.rank));
                raw.y.push_back(p.raw);
                smooth.x.push_back(static_cast<double>(p.rank));
                smooth.y.push_back(p.smoothed);
            }
            const std::string acc = config.bundles.size() == 1 ? "accuracy" : "accuracy_" + std::to_string(r);
            json acc_audit = audit;
            acc_audit["threshold"] = curve.threshold;
            famlab::report::write_csv(out / (acc + ".csv"), csv, acc_audit);
            famlab::report::write_svg(out / (acc + ".svg"),
                                      {"Anomaly detection accuracy: " + bundle.name, "novel image rank (ascending score)",
                                       "accuracy", "", {raw, smooth}});
        }
        results.push_back({{"bundle", bundle.name}, {"auroc", roc.auroc}, {"ci_low", rj.value("ci_low", json(nullptr))},
                           {"ci_high", rj.value("ci_high", json(nullptr))}});
    }

    json summary = {{"params", params}, {"results", results}};
    if (config.replications) {
        const auto agg = famlab::eval::aggregate_replications(values);
        summary["replications"] = {{"mean", agg.mean}, {"sd", agg.sd}, {"values", agg.values}};
        famlab::report::write_json(out / "replications.json", summary["replications"]);
    }
    famlab::report::write_json(out / "eval.json", summary);
    std::cout << summary.dump() << "\n";
    return 0;
}

std::string type_color(famlab::familiarity::FeatureType type) {
    using famlab::familiarity::FeatureType;
    switch (type) {
        case FeatureType::positive_presence: return "#d62728";
        case FeatureType::negative_presence: return "#ff9896";
        case FeatureType::positive_absence: return "#aec7e8";
        case FeatureType::negative_absence: return "#1f77b4";
        case FeatureType::neutral: return "#999999";
    }
    return "#999999";
}

int cmd_familiarity(const RunConfig& config) {
    namespace fam = famlab::familiarity;
    if (config.bundles.size() != 1) throw famlab::ValidationError("familiarity: exactly one --bundle is required");
    const auto bundle = famlab::read_bundle(config.bundles[0]);
    if (!bundle.z_blur) throw famlab::ValidationError("z_blur: familiarity analysis needs blurred activations");
    const auto out = prepare_out(config);
    const auto reference = parse_reference(config.reference);

    const json audit = {{"subcommand", "familiarity"},
                        {"params",
                         {{"bundle", config.bundles[0]},
                          {"threshold", config.threshold},
                          {"reference", config.reference},
                          {"include_known", config.include_known},
                          {"f", config.f},
                          {"id_fpr", config.id_fpr}}}};

    const auto oo = fam::on_object_scores(bundle);
    const auto taxonomy = fam::classify_features(oo, bundle.head, config.threshold);
    const auto contrib = fam::contributions(bundle, reference);

    Csv tax({"feature", "class", "oo", "weight", "type"});
    json type_counts = json::object();
    for (Eigen::Index c = 0; c < bundle.classes(); ++c) {
        for (Eigen::Index j = 0; j < bundle.features(); ++j)
            tax.row({std::to_string(j), std::to_string(c), format_double(oo.oo(j, c)),
                     format_double(bundle.head.w(j, c)), fam::to_string(taxonomy.at(j, c))});
        const auto counts = taxonomy.counts(c);
        json cj = json::object();
        for (std::size_t t = 0; t < fam::kFeatureTypeCount; ++t)
            cj[fam::to_string(static_cast<fam::FeatureType>(t))] = counts[t];
        type_counts[bundle.class_names[static_cast<std::size_t>(c)]] = cj;
    }
    famlab::report::write_csv(out / "taxonomy.csv", tax, audit);

    const auto selected = fam::select_images(bundle, config.include_known);
    auto records = fam::decompose(bundle, taxonomy, contrib.mean, selected);
    std::stable_sort(records.begin(), records.end(),
                     [](const auto& a, const auto& b) { return a.max_logit < b.max_logit; });

    Csv dec({"image", "class", "max_logit", "pp", "na", "pa", "np", "neutral"});
    for (const auto& r : records)
        dec.row({std::to_string(r.image), std::to_string(r.cls), format_double(r.max_logit), format_double(r.pp),
                 format_double(r.na), format_double(r.pa), format_double(r.np), format_double(r.neutral)});
    famlab::report::write_csv(out / "decomposition.csv", dec, audit);

    json summary = {{"bundle", bundle.name}, {"type_counts", type_counts}, {"records", records.size()}};
    std::vector<std::string> warnings;

    // Effects against rank in increasing max-logit order, with LOWESS overlays.
    const std::size_t n = records.size();
    std::vector<double> ranks(n);
    std::iota(ranks.begin(), ranks.end(), 0.0);
    struct Effect {
        const char* name;
        const char* color;
        double fam::DecompositionRecord::*member;
    };
    const Effect effects[] = {{"positive presence", "#d62728", &fam::DecompositionRecord::pp},
                              {"negative absence", "#1f77b4", &fam::DecompositionRecord::na},
                              {"positive absence", "#2ca02c", &fam::DecompositionRecord::pa},
                              {"negative presence", "#ff7f0e", &fam::DecompositionRecord::np}};
    famlab::report::Plot effects_plot{"Decomposed novelty scores: " + bundle.name, "image rank (increasing max logit)",
                                      "effect (sum of delta)", "", {}};
    std::vector<std::vector<double>> smoothed;
    for (const auto& e : effects) {
        famlab::report::Series pts{"", e.color};
        pts.radius = 1.5;
        std::vector<double> values(n);
        for (std::size_t r = 0; r < n; ++r) values[r] = records[r].*(e.member);
        pts.x = ranks;
        pts.y = values;
        effects_plot.series.push_back(pts);
        if (n >= 3 && std::ceil(config.f * static_cast<double>(n) - 1e-9) >= 2) {
            smoothed.push_back(famlab::numerics::lowess(ranks, values, config.f, config.iterations).fitted);
            effects_plot.series.push_back({e.name, e.color, ranks, smoothed.back(), true});
        }
    }
    if (!smoothed.empty()) {
        Csv lo({"rank", "image", "pp", "na", "pa", "np"});
        for (std::size_t r = 0; r < n; ++r)
            lo.row({std::to_string(r), std::to_string(records[r].image), format_double(smoothed[0][r]),
                    format_double(smoothed[1][r]), format_double(smoothed[2][r]), format_double(smoothed[3][r])});
        famlab::report::write_csv(out / "effects_lowess.csv", lo, audit);
    } else {
        warnings.push_back("too few records for LOWESS overlays");
    }
    famlab::report::write_svg(out / "effects.svg", effects_plot);

    // Detection accuracy of the max-logit score over novel images in the same order.
    const auto max_logit = famlab::scoring::max_logit_score(bundle);
    std::vector<double> known_scores;
    for (Eigen::Index i = 0; i < bundle.images(); ++i)
        if (bundle.is_known(i)) known_scores.push_back(max_logit.scores(i));
    std::vector<const fam::DecompositionRecord*> novel_records;
    for (const auto& r : records)
        if (bundle.is_novel(static_cast<Eigen::Index>(r.image))) novel_records.push_back(&r);
    if (!known_scores.empty() && novel_records.size() >= 3 &&
        std::ceil(config.f * static_cast<double>(novel_records.size()) - 1e-9) >= 2) {
        const double tau = famlab::eval::novelty_threshold(known_scores, config.id_fpr);
        std::vector<double> x(novel_records.size()), raw(novel_records.size());
        for (std::size_t r = 0; r < novel_records.size(); ++r) {
            x[r] = static_cast<double>(r);
            raw[r] = max_logit.scores(static_cast<Eigen::Index>(novel_records[r]->image)) > tau ? 1.0 : 0.0;
        }
        const auto fit = famlab::numerics::lowess(x, raw, config.f, config.iterations);
        Csv acc({"rank", "image", "max_logit", "raw_accuracy", "smoothed_accuracy", "pp"});
        famlab::report::Series acc_line{"accuracy (LOWESS)", "#000000", x, fit.fitted, true};
        famlab::report::Series pp_pts{"positive presence effect", "#d62728"};
        pp_pts.right_axis = true;
        pp_pts.radius = 1.5;
        for (std::size_t r = 0; r < novel_records.size(); ++r) {
            acc.row({std::to_string(r), std::to_string(novel_records[r]->image), format_double(novel_records[r]->max_logit),
                     format_double(raw[r]), format_double(fit.fitted[r]), format_double(novel_records[r]->pp)});
            pp_pts.x.push_back(x[r]);
            pp_pts.y.push_back(novel_records[r]->pp);
        }
        json acc_audit = audit;
        acc_audit["threshold"] = tau;
        famlab::report::write_csv(out / "accuracy.csv", acc, acc_audit);
        famlab::report::write_svg(out / "accuracy.svg", {"Detection accuracy vs positive presence effect", "novel image rank (increasing max logit)",
                                                         "accuracy", "positive presence effect", {acc_line, pp_pts}});
        summary["threshold"] = tau;
    } else {
        warnings.push_back("accuracy curve needs known images and at least 3 novel images");
    }

    // Per-feature contributions for the most novel selected image.
    if (!records.empty()) {
        const auto& top = records.front();
        const auto k = top.cls;
        const auto row = fam::contribution_row(bundle, static_cast<Eigen::Index>(top.image), k);
        std::vector<Eigen::Index> order(static_cast<std::size_t>(bundle.features()));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return contrib.mean(a, k) < contrib.mean(b, k); });
        constexpr std::size_t kTail = 200;
        if (order.size() > 2 * kTail) order.erase(order.begin() + kTail, order.end() - kTail);
        Csv cc({"rank", "feature", "mean_contribution", "contribution", "type"});
        famlab::report::Series line{"mean contribution", "#1f77b4"}, pts{"image " + std::to_string(top.image), "#d62728"};
        line.line = true;
        for (std::size_t r = 0; r < order.size(); ++r) {
            const auto j = order[r];
            cc.row({std::to_string(r), std::to_string(j), format_double(contrib.mean(j, k)), format_double(row(j)),
                    fam::to_string(taxonomy.at(j, k))});
            line.x.push_back(static_cast<double>(r));
            line.y.push_back(contrib.mean(j, k));
            pts.x.push_back(static_cast<double>(r));
            pts.y.push_back(row(j));
            pts.point_colors.push_back(type_color(taxonomy.at(j, k)));
        }
        json cc_audit = audit;
        cc_audit["image"] = top.image;
        cc_audit["class"] = k;
        famlab::report::write_csv(out / "contributions.csv", cc, cc_audit);
        famlab::report::write_svg(out / "contributions.svg",
                                  {"Contributions to class " + bundle.class_names[static_cast<std::size_t>(k)] +
                                       " for image " + std::to_string(top.image),
                                   "feature (sorted by mean contribution)", "contribution", "", {line, pts}});
    }

    summary["warnings"] = warnings;
    famlab::report::write_json(out / "familiarity.json", summary);
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_activations(const RunConfig& config) {
    namespace act = famlab::activity;
    if (config.bundles.empty()) throw famlab::ValidationError("activations: at least one --bundle is required");
    const auto out = prepare_out(config);
    const auto thetas = parse_thetas(config.thetas);
    const auto contribution_thetas = config.contribution_thetas.empty() ? thetas : parse_thetas(config.contribution_thetas);
    const json audit = {{"subcommand", "activations"},
                        {"params",
                         {{"bundles", config.bundles},
                          {"thetas", thetas},
                          {"contribution_class", config.contribution_class},
                          {"contribution_thetas", contribution_thetas},
                          {"contribution_reference", config.contribution_reference},
                          {"q", config.q}}}};

    const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    const auto group_name = [](std::int64_t g) { return g == famlab::kKnownGroup ? "known" : "novel"; };

    Csv curve_csv({"bundle", "group", "theta", "mean_count"});
    Csv contrib_csv({"bundle", "group", "class", "theta", "mean_count"});
    Csv hist_csv({"bundle", "feature", "fraction"});
    famlab::report::Plot curve_plot{"Mean number of activations above threshold", "theta", "mean count", "", {}};
    famlab::report::Plot contrib_plot{"Mean number of |contributions| above threshold", "theta", "mean count", "", {}};
    famlab::report::Plot hist_plot{"Fraction of known instances with z >= theta", "fraction of instances",
                                   "number of features", "", {}};
    json stats = json::array();
    std::size_t colour = 0;

    for (const auto& path : config.bundles) {
        const auto bundle = famlab::read_bundle(path);
        const auto curve = act::activation_curve(bundle, thetas);
        for (const auto& g : curve.groups) {
            famlab::report::Series s{bundle.name + " " + group_name(g.group), palette[colour++ % 6], thetas, g.mean_counts, true};
            curve_plot.series.push_back(s);
            for (std::size_t t = 0; t < thetas.size(); ++t)
                curve_csv.row({bundle.name, group_name(g.group), format_double(thetas[t]), format_double(g.mean_counts[t])});
        }

        json entry = {{"bundle", bundle.name}, {"warnings", curve.warnings}};
        if (config.contribution_class >= 0) {
            const auto cc = act::contribution_curve(bundle, config.contribution_class, contribution_thetas,
                                                    parse_reference(config.contribution_reference));
            for (const auto& g : cc.groups) {
                contrib_plot.series.push_back({bundle.name + " " + group_name(g.group), palette[colour++ % 6],
                                               contribution_thetas, g.mean_counts, true});
                for (std::size_t t = 0; t < contribution_thetas.size(); ++t)
                    contrib_csv.row({bundle.name, group_name(g.group), std::to_string(config.contribution_class),
                                     format_double(contribution_thetas[t]), format_double(g.mean_counts[t])});
            }
            entry["contribution_warnings"] = cc.warnings;
        }

        if (bundle.count_known() > 0) {
            const auto hist = act::activity_histogram(bundle, config.q);
            for (std::size_t j = 0; j < hist.fractions.size(); ++j)
                hist_csv.row({bundle.name, std::to_string(j), format_double(hist.fractions[j])});
            // 50 bins of width 0.02 over [0, 1].
            famlab::report::Series bars{bundle.name, palette[colour++ % 6]};
            std::vector<double> bins(50, 0.0);
            for (double f : hist.fractions) bins[std::min<std::size_t>(49, static_cast<std::size_t>(f * 50.0))] += 1.0;
            for (std::size_t b = 0; b < bins.size(); ++b) {
                bars.x.push_back((static_cast<double>(b) + 0.5) / 50.0);
                bars.y.push_back(bins[b]);
            }
            bars.line = true;
            hist_plot.series.push_back(bars);
            entry["histogram"] = {{"q", hist.q}, {"theta", hist.theta}, {"n_known", hist.n_known}};
            entry["mean_activation_magnitude"] = act::mean_activation_magnitude(bundle);
        }
        json norms = json::array();
        for (const auto& s : act::norm_stats(bundle))
            norms.push_back({{"group", group_name(s.group)}, {"count", s.count}, {"mean", s.mean}, {"sd", s.sd}});
        entry["norms"] = norms;
        stats.push_back(entry);
    }

    famlab::report::write_csv(out / "activation_curve.csv", curve_csv, audit);
    famlab::report::write_svg(out / "activation_curve.svg", curve_plot);
    if (config.contribution_class >= 0) {
        famlab::report::write_csv(out / "contribution_curve.csv", contrib_csv, audit);
        famlab::report::write_svg(out / "contribution_curve.svg", contrib_plot);
    }
    famlab::report::write_csv(out / "histogram.csv", hist_csv, audit);
    famlab::report::write_svg(out / "histogram.svg", hist_plot);
    const json summary = {{"params", audit["params"]}, {"bundles", stats}};
    famlab::report::write_json(out / "activations.json", summary);
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_synth(const RunConfig& config) {
    famlab::synth::SyntheticSpec spec;
    if (!config.spec_path.empty()) {
        json j;
        try {
            j = json::parse(famlab::read_file(config.spec_path));
        } catch (const json::parse_error& e) {
            throw famlab::ValidationError(std::string("synthetic spec: invalid JSON: ") + e.what());
        }
        spec = famlab::synth::spec_from_json(j);
    }
    if (config.seed >= 0) spec.seed = static_cast<std::uint64_t>(config.seed);
    famlab::synth::validate(spec);
    const auto out = prepare_out(config);
    const auto bundle = famlab::synth::generate(spec);
    const auto manifest = famlab::write_bundle(bundle, out);
    const json summary = {{"spec", famlab::synth::spec_to_json(spec)},
                          {"manifest", manifest.filename().string()},
                          {"sha256", famlab::bundle_digest(manifest)}};
    famlab::report::write_json(out / "synth.json", summary);
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_lowess(const RunConfig& config) {
    if (config.input.empty() || config.output.empty()) throw famlab::ValidationError("lowess: --input and --output are required");
    const std::string text = famlab::read_file(config.input);
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) throw famlab::ValidationError("lowess: input is empty");
    std::vector<std::string> header;
    {
        std::stringstream hs(line);
        for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
    }
    std::size_t xi = 0, yi = 1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "x") xi = c;
        if (header[c] == "y") yi = c;
    }
    if (header.size() < 2) throw famlab::ValidationError("lowess: need two columns");
    std::vector<double> x, y;
    std::size_t line_no = 1;
    while (std::getline(ss, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        if (cells.size() <= std::max(xi, yi)) throw famlab::ValidationError("lowess: short row at line " + std::to_string(line_no));
        try {
            x.push_back(std::stod(cells[xi]));
            y.push_back(std::stod(cells[yi]));
        } catch (...) {
            throw famlab::ValidationError("lowess: bad number at line " + std::to_string(line_no));
        }
    }
    const auto fit = famlab::numerics::lowess(x, y, config.f, config.iterations);
    Csv csv({"x", "y", "fitted"});
    for (std::size_t i = 0; i < x.size(); ++i) csv.row({format_double(x[i]), format_double(y[i]), format_double(fit.fitted[i])});
    const json audit = {{"subcommand", "lowess"},
                        {"params", {{"input", config.input}, {"f", config.f}, {"iterations", config.iterations}}}};
    const fs::path output(config.output);
    if (output.has_parent_path()) fs::create_directories(output.parent_path());
    famlab::report::write_csv(output, csv, audit);
    return 0;
}

int exit_code(famlab::ErrorKind kind) {
    switch (kind) {
        case famlab::ErrorKind::validation: return 2;
        case famlab::ErrorKind::io: return 3;
        case famlab::ErrorKind::numerical: return 4;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"famlab: novelty scoring and familiarity diagnostics for classifier activations"};
    app.require_subcommand(1);
    RunConfig config;

    const auto add_bundle = [&](CLI::App* sub, bool many) {
        auto* opt = sub->add_option("--bundle", config.bundles, many ? "Bundle manifest(s)" : "Bundle manifest")->required();
        if (!many) opt->expected(1);
    };
    const auto add_scoring = [&](CLI::App* sub) {
        sub->add_option("--method", config.method, "maxlogit | maxsoftmax | mahalanobis | dice")->capture_default_str();
        sub->add_option("--fit-bundle", config.fit_bundle, "Bundle whose known images fit mahalanobis / dice");
        sub->add_option("--keep-fraction", config.keep_fraction, "DICE fraction of weights kept")->capture_default_str();
        sub->add_option("--ridge-scale", config.ridge_scale, "Mahalanobis ridge, relative to mean variance")->capture_default_str();
        sub->add_option("--reference", config.reference, "ground_truth | predicted")->capture_default_str();
        sub->add_option("--known-activations", config.known_activations, "plain | blurred (occlusion comparison)")
            ->capture_default_str();
    };

    auto* score = app.add_subcommand("score", "Compute novelty scores");
    add_bundle(score, false);
    add_scoring(score);
    score->add_option("--out", config.out, "Output directory")->required();

    auto* eval = app.add_subcommand("eval", "AUROC, bootstrap CI, ROC and accuracy curves");
    add_bundle(eval, true);
    add_scoring(eval);
    eval->add_option("--scores", config.scores_path, "Precomputed scores (.npy) instead of --method");
    eval->add_option("--resamples", config.resamples, "Bootstrap resamples (0 disables)")->capture_default_str();
    eval->add_option("--seed", config.seed, "Bootstrap seed");
    eval->add_option("--id-fpr", config.id_fpr, "Known false-positive rate fixing the accuracy threshold")->capture_default_str();
    eval->add_option("--f", config.f, "LOWESS span")->capture_default_str();
    eval->add_flag("--replications", config.replications, "Aggregate AUROC over the given bundles");
    eval->add_option("--out", config.out, "Output directory")->required();

    auto* fam = app.add_subcommand("familiarity", "Blur taxonomy and logit decomposition");
    add_bundle(fam, false);
    fam->add_option("--threshold", config.threshold, "On-object score threshold")->capture_default_str();
    fam->add_option("--reference", config.reference, "ground_truth | predicted")->capture_default_str();
    fam->add_flag("--include-known", config.include_known, "Decompose known images too");
    fam->add_option("--f", config.f, "LOWESS span")->capture_default_str();
    fam->add_option("--id-fpr", config.id_fpr, "Known false-positive rate for the accuracy threshold")->capture_default_str();
    fam->add_option("--out", config.out, "Output directory")->required();

    auto* acts = app.add_subcommand("activations", "Activation count curves and activity histograms");
    add_bundle(acts, true);
    acts->add_option("--thetas", config.thetas, "start:stop:step or comma list")->capture_default_str();
    acts->add_option("--contribution-class", config.contribution_class, "Class for the contribution curve (-1 skips)")
        ->capture_default_str();
    acts->add_option("--contribution-thetas", config.contribution_thetas, "Grid for the contribution curve (default --thetas)");
    acts->add_option("--contribution-reference", config.contribution_reference, "predicted | ground_truth")->capture_default_str();
    acts->add_option("--q", config.q, "Quantile for the activity histogram")->capture_default_str();
    acts->add_option("--out", config.out, "Output directory")->required();

    auto* syn = app.add_subcommand("synth", "Generate a synthetic bundle");
    syn->add_option("--spec", config.spec_path, "Synthetic spec JSON (defaults otherwise)");
    syn->add_option("--seed", config.seed, "Override the spec seed");
    syn->add_option("--out", config.out, "Output directory")->required();

    auto* low = app.add_subcommand("lowess", "LOWESS-smooth an x,y CSV");
    low->add_option("--input", config.input, "CSV with x and y columns")->required();
    low->add_option("--output", config.output, "Output CSV")->required();
    low->add_option("--f", config.f, "Span fraction")->capture_default_str();
    low->add_option("--iterations", config.iterations, "Robustifying iterations")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*score) return cmd_score(config);
        if (*eval) return cmd_eval(config);
        if (*fam) return cmd_familiarity(config);
        if (*acts) return cmd_activations(config);
        if (*syn) return cmd_synth(config);
        if (*low) return cmd_lowess(config);
    } catch (const famlab::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
