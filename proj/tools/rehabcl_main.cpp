// rehabcl: skeleton-based exercise quality assessment via supervised
// contrastive learning. Subcommands cover dataset preparation, contrastive
// training, reference calibration, inference, evaluation, embedding export
// and plotting; every run echoes its resolved configuration for provenance.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "rehabcl/evaluation.hpp"
#include "rehabcl/inference.hpp"
#include "rehabcl/model.hpp"
#include "rehabcl/serde.hpp"
#include "rehabcl/skeleton_data.hpp"
#include "rehabcl/synthetic.hpp"
#include "rehabcl/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace rehabcl;

namespace {

fs::path apply_out_root(const fs::path& path) {
    if (path.is_absolute()) return path;
    if (const char* root = std::getenv("REHABCL_OUT_ROOT")) return fs::path(root) / path;
    return path;
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config file: " + path.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void ensure_fresh_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!force)
            throw ArgumentError("output directory " + dir.string() +
                                " exists and is not empty (use --force to overwrite)");
        fs::remove_all(dir);
    }
    fs::create_directories(dir);
}

void print_warnings(const Warnings& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

Dataset load_canonical(const fs::path& dir) {
    if (!fs::exists(dir / "meta.json"))
        throw ArgumentError("not a canonical dataset directory (missing meta.json): " + dir.string());
    return ingest(DatasetKind::canonical, dir);
}

// Resolved settings shared by the model-driven commands.
struct RunSettings {
    EncoderConfig encoder;
    ProjectionConfig projection;
    TrainConfig train;
    HeadMode head_mode = HeadMode::with_projection;
    double variance_epsilon = 1e-8;
    SplitScheme protocol = SplitScheme::ratio_3_1;
    std::uint64_t eval_seed = 0;
};

RunSettings settings_from_config(const json& cfg) {
    RunSettings s;
    if (cfg.contains("model")) {
        const auto& model = cfg.at("model");
        if (model.contains("encoder")) s.encoder = encoder_from_json(model.at("encoder"));
        if (model.contains("projection")) s.projection = projection_from_json(model.at("projection"));
    }
    if (cfg.contains("train")) s.train = train_from_json(cfg.at("train"));
    if (cfg.contains("inference")) {
        const auto& inf = cfg.at("inference");
        if (inf.contains("head_mode")) s.head_mode = parse_head_mode(inf.at("head_mode").get<std::string>());
        s.variance_epsilon = inf.value("variance_epsilon", s.variance_epsilon);
    }
    if (cfg.contains("eval")) {
        const auto& ev = cfg.at("eval");
        if (ev.contains("protocol")) s.protocol = parse_split_scheme(ev.at("protocol").get<std::string>());
        s.eval_seed = ev.value("seed", s.eval_seed);
    }
    return s;
}

json settings_to_config(const RunSettings& s) {
    json cfg;
    cfg["model"] = {{"encoder", to_json(s.encoder)}, {"projection", to_json(s.projection)}};
    cfg["train"] = to_json(s.train);
    cfg["inference"] = {{"head_mode", to_string(s.head_mode)},
                        {"variance_epsilon", s.variance_epsilon}};
    cfg["eval"] = {{"protocol", to_string(s.protocol)}, {"seed", s.eval_seed}};
    return cfg;
}

// ---------------------------------------------------------------------------
// Minimal SVG output for the loss-curve and projection figures.

struct SvgCanvas {
    double width = 760, height = 520, margin = 56;
    std::string body;

    double map_x(double v, double lo, double hi) const {
        return margin + (v - lo) / (hi - lo + 1e-300) * (width - 2 * margin);
    }
    double map_y(double v, double lo, double hi) const {
        return height - margin - (v - lo) / (hi - lo + 1e-300) * (height - 2 * margin);
    }
    void save(const fs::path& path, const std::string& title) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
            << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
            << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
            << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
               "font-family=\"sans-serif\">"
            << title << "</text>\n"
            << body << "</svg>\n";
        if (!out) throw IoError("failed writing " + path.string());
    }
};

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

void plot_loss_curves(const fs::path& log_path, const fs::path& out_path) {
    std::ifstream in(log_path);
    if (!in) throw ArgumentError("cannot open training log: " + log_path.string());
    std::vector<double> epochs;
    std::map<std::string, std::vector<double>> series;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        epochs.push_back(rec.value("epoch", static_cast<double>(epochs.size())));
        for (const char* key : {"loss", "train_mse", "val_mse"})
            if (rec.contains(key) && !rec[key].is_null()) series[key].push_back(rec[key].get<double>());
    }
    if (epochs.empty()) throw ArgumentError("training log is empty: " + log_path.string());

    double lo = 1e300, hi = -1e300;
    for (const auto& [name, values] : series)
        for (double v : values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    SvgCanvas svg;
    std::ostringstream body;
    body << "<line x1=\"" << svg.margin << "\" y1=\"" << svg.height - svg.margin << "\" x2=\""
         << svg.width - svg.margin << "\" y2=\"" << svg.height - svg.margin
         << "\" stroke=\"black\"/>\n<line x1=\"" << svg.margin << "\" y1=\"" << svg.margin
         << "\" x2=\"" << svg.margin << "\" y2=\"" << svg.height - svg.margin << "\" stroke=\"black\"/>\n";
    int color = 0;
    double legend_y = svg.margin;
    for (const auto& [name, values] : series) {
        std::ostringstream points;
        for (size_t i = 0; i < values.size(); ++i)
            points << svg.map_x(static_cast<double>(i), 0, static_cast<double>(values.size() - 1)) << ","
                   << svg.map_y(values[i], lo, hi) << " ";
        body << "<polyline fill=\"none\" stroke=\"" << kPalette[color % 10] << "\" stroke-width=\"1.5\" "
             << "points=\"" << points.str() << "\"/>\n";
        body << "<text x=\"" << svg.width - svg.margin - 110 << "\" y=\"" << legend_y
             << "\" font-size=\"12\" font-family=\"sans-serif\" fill=\"" << kPalette[color % 10] << "\">"
             << name << "</text>\n";
        legend_y += 16;
        ++color;
    }
    svg.body = body.str();
    svg.save(out_path, "training curves");
}

void plot_projection(const fs::path& tsv_path, const fs::path& out_path, double perplexity,
                     std::uint64_t seed) {
    std::ifstream in(tsv_path);
    if (!in) throw ArgumentError("cannot open embeddings table: " + tsv_path.string());
    std::string header;
    if (!std::getline(in, header)) throw ArgumentError("empty embeddings table: " + tsv_path.string());
    std::vector<std::string> columns;
    {
        std::stringstream ss(header);
        std::string col;
        while (std::getline(ss, col, '\t')) columns.push_back(col);
    }
    long proj_x = -1, proj_y = -1, first_dim = -1, dim_count = 0;
    for (size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == "proj_x") proj_x = static_cast<long>(i);
        else if (columns[i] == "proj_y") proj_y = static_cast<long>(i);
        else if (columns[i].size() > 1 && columns[i][0] == 'e' &&
                 std::isdigit(static_cast<unsigned char>(columns[i][1]))) {
            if (first_dim < 0) first_dim = static_cast<long>(i);
            ++dim_count;
        }
    }

    struct Row {
        std::string id, type, assessment;
        std::vector<double> values;
        double x = 0, y = 0;
    };
    std::vector<Row> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, '\t')) cells.push_back(cell);
        Row row;
        row.id = cells.at(0);
        row.type = cells.at(1);
        row.assessment = cells.at(2);
        if (proj_x >= 0 && proj_y >= 0) {
            row.x = std::stod(cells.at(static_cast<size_t>(proj_x)));
            row.y = std::stod(cells.at(static_cast<size_t>(proj_y)));
        } else {
            for (long d = 0; d < dim_count; ++d)
                row.values.push_back(std::stod(cells.at(static_cast<size_t>(first_dim + d))));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ArgumentError("embeddings table has no data rows");

    if (proj_x < 0) {
        Tensor points({static_cast<long>(rows.size()), dim_count});
        for (size_t r = 0; r < rows.size(); ++r)
            std::copy(rows[r].values.begin(), rows[r].values.end(),
                      points.data() + static_cast<long>(r) * dim_count);
        auto projected = tsne_project(points, perplexity, seed);
        for (size_t r = 0; r < rows.size(); ++r) {
            rows[r].x = projected[r][0];
            rows[r].y = projected[r][1];
        }
    }

    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (const auto& r : rows) {
        xlo = std::min(xlo, r.x);
        xhi = std::max(xhi, r.x);
        ylo = std::min(ylo, r.y);
        yhi = std::max(yhi, r.y);
    }
    std::map<std::string, int> type_color;
    for (const auto& r : rows)
        if (!type_color.count(r.type)) {
            int next = static_cast<int>(type_color.size());
            type_color[r.type] = next;
        }

    SvgCanvas svg;
    std::ostringstream body;
    for (const auto& r : rows) {
        double px = svg.map_x(r.x, xlo, xhi), py = svg.map_y(r.y, ylo, yhi);
        const char* color = kPalette[type_color[r.type] % 10];
        if (r.assessment == "ref") {
            // Reference representations drawn as plus markers.
            body << "<path d=\"M " << px - 6 << " " << py << " H " << px + 6 << " M " << px << " "
                 << py - 6 << " V " << py + 6 << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
        } else {
            double r_px = r.assessment == "-" ? 2.5 : 3.5;
            const char* fill = r.assessment == "-" ? "white" : color;
            body << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"" << r_px << "\" fill=\"" << fill
                 << "\" stroke=\"" << color << "\"/>\n";
        }
    }
    double legend_y = svg.margin;
    for (const auto& [type, color] : type_color) {
        body << "<text x=\"" << svg.width - svg.margin + 6 << "\" y=\"" << legend_y
             << "\" font-size=\"12\" font-family=\"sans-serif\" fill=\"" << kPalette[color % 10] << "\">"
             << type << "</text>\n";
        legend_y += 16;
    }
    svg.body = body.str();
    svg.save(out_path, "embedding projection");
}

void write_epoch_log(const fs::path& path, const std::vector<EpochStats>& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& e : log) {
        json rec;
        rec["epoch"] = e.epoch;
        rec["loss"] = e.loss;
        rec["loss_mean_per_anchor"] = e.loss_mean_per_anchor;
        rec["anchors"] = e.anchors;
        rec["mean_positives"] = e.mean_positives;
        rec["mean_hard"] = e.mean_hard;
        rec["mean_soft"] = e.mean_soft;
        rec["skipped_batches"] = e.skipped_batches;
        rec["skipped_anchors"] = e.skipped_anchors;
        rec["seconds"] = e.seconds;
        out << rec.dump() << "\n";
    }
}

void write_regression_log(const fs::path& path, const std::vector<RegressionEpochStats>& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& e : log) {
        json rec;
        rec["epoch"] = e.epoch;
        rec["train_mse"] = e.train_mse;
        rec["val_mse"] = e.val_mse ? json(*e.val_mse) : json(nullptr);
        rec["seconds"] = e.seconds;
        out << rec.dump() << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skeleton-based rehabilitation exercise assessment (contrastive learning)"};
    app.require_subcommand(1);
    bool error_json = false;
    app.add_flag("--error-json", error_json, "emit errors as JSON on stderr");

    std::string config_path, dataset_kind, data_dir, out_path, checkpoint_path, refs_path;
    std::string head_mode_str, protocol_str, loss_mode_str, exercise, embeddings_path, log_path;
    std::string root_path, validation_dir;
    long target_frames = 64;
    bool force = false, no_center = false, use_ri = false, project_2d = false, from_scratch = false;
    bool no_freeze = false, no_calibrate = false;
    long epochs = -1, batch = -1, checkpoint_every = -1;
    double lr = -1, temperature = -1, perplexity = 20.0, epsilon = -1;
    std::int64_t seed = -1;
    int synth_types = 3, synth_per_type = 60;
    long synth_frames = 64;
    bool synth_regression = false;

    // --- prepare ---
    auto* prepare = app.add_subcommand("prepare", "ingest a raw dataset into the canonical layout");
    prepare->add_option("--dataset", dataset_kind, "uiprmd | irds | kimore | canonical")->required();
    prepare->add_option("--root", root_path, "raw dataset root")->required();
    prepare->add_option("--out", out_path, "canonical output directory")->required();
    prepare->add_option("--target-frames", target_frames, "canonical sequence length (default 64)");
    prepare->add_flag("--force", force, "overwrite an existing output directory");
    prepare->add_flag("--no-center", no_center, "skip root-joint centering");

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "generate a synthetic demo dataset (canonical layout)");
    synth->add_option("--out", out_path)->required();
    synth->add_option("--seed", seed);
    synth->add_option("--types", synth_types);
    synth->add_option("--samples-per-type", synth_per_type);
    synth->add_option("--frames", synth_frames);
    synth->add_flag("--regression", synth_regression, "clinical-score variant (single type)");
    synth->add_flag("--force", force);

    // --- train ---
    auto* train = app.add_subcommand("train", "contrastive pre-training on a canonical dataset");
    train->add_option("--config", config_path, "JSON run config");
    train->add_option("--data", data_dir, "canonical dataset directory")->required();
    train->add_option("--out", out_path, "run output directory")->required();
    train->add_option("--seed", seed);
    train->add_option("--epochs", epochs);
    train->add_option("--batch", batch, "tuples per mini-batch (N)");
    train->add_option("--lr", lr);
    train->add_option("--temperature", temperature);
    train->add_option("--loss-mode", loss_mode_str, "literal | prose");
    train->add_option("--checkpoint-every", checkpoint_every);
    train->add_flag("--ri", use_ri, "rotation-invariant descriptor input");
    train->add_flag("--force", force);

    // --- transfer ---
    auto* transfer = app.add_subcommand("transfer", "fine-tune to clinical-score regression");
    transfer->add_option("--config", config_path);
    transfer->add_option("--checkpoint", checkpoint_path, "pre-trained checkpoint")->required();
    transfer->add_option("--data", data_dir, "canonical regression dataset")->required();
    transfer->add_option("--validation", validation_dir, "optional canonical validation dataset");
    transfer->add_option("--exercise", exercise, "restrict to one exercise type");
    transfer->add_option("--out", out_path)->required();
    transfer->add_option("--seed", seed);
    transfer->add_option("--epochs", epochs);
    transfer->add_option("--batch", batch);
    transfer->add_option("--lr", lr);
    transfer->add_flag("--no-freeze-encoder", no_freeze, "fine-tune the encoder as well");
    transfer->add_flag("--from-scratch", from_scratch, "random encoder instead of the checkpoint");
    transfer->add_flag("--force", force);

    // --- calibrate ---
    auto* calibrate = app.add_subcommand("calibrate", "build references and per-type thresholds");
    calibrate->add_option("--checkpoint", checkpoint_path)->required();
    calibrate->add_option("--data", data_dir, "canonical training dataset")->required();
    calibrate->add_option("--out", out_path, "reference-set JSON file")->required();
    calibrate->add_option("--head-mode", head_mode_str, "with_projection | encoder_only");
    calibrate->add_option("--epsilon", epsilon, "variance epsilon");
    calibrate->add_flag("--no-thresholds", no_calibrate, "keep default thresholds");

    // --- infer ---
    auto* infer = app.add_subcommand("infer", "score samples against a reference set");
    infer->add_option("--checkpoint", checkpoint_path)->required();
    infer->add_option("--refs", refs_path)->required();
    infer->add_option("--data", data_dir)->required();
    infer->add_option("--out", out_path, "predictions JSONL file")->required();

    // --- eval ---
    auto* eval_cmd = app.add_subcommand("eval", "protocol evaluation with per-type metrics");
    eval_cmd->add_option("--config", config_path);
    eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
    eval_cmd->add_option("--data", data_dir)->required();
    eval_cmd->add_option("--protocol", protocol_str, "ratio_3_1 | kfold_5");
    eval_cmd->add_option("--refs", refs_path, "evaluate against an existing reference set");
    eval_cmd->add_option("--out", out_path, "report output directory")->required();
    eval_cmd->add_option("--seed", seed);
    eval_cmd->add_option("--head-mode", head_mode_str);
    eval_cmd->add_flag("--force", force);

    // --- embed ---
    auto* embed = app.add_subcommand("embed", "export embeddings (optionally with a 2-d projection)");
    embed->add_option("--checkpoint", checkpoint_path)->required();
    embed->add_option("--data", data_dir)->required();
    embed->add_option("--out", out_path, "TSV output file")->required();
    embed->add_option("--head-mode", head_mode_str);
    embed->add_option("--perplexity", perplexity);
    embed->add_option("--seed", seed);
    embed->add_option("--refs", refs_path, "mark reference rows from this reference set");
    embed->add_flag("--project", project_2d, "append a 2-component projection");

    // --- plot ---
    auto* plot = app.add_subcommand("plot", "render loss curves or embedding projections to SVG");
    plot->add_option("--embeddings", embeddings_path, "embeddings TSV from `embed`");
    plot->add_option("--log", log_path, "training log JSONL");
    plot->add_option("--out", out_path)->required();
    plot->add_option("--perplexity", perplexity);
    plot->add_option("--seed", seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*prepare) {
            DatasetKind kind = parse_dataset_kind(dataset_kind);
            fs::path out = apply_out_root(out_path);
            ensure_fresh_dir(out, force);
            Warnings warnings;
            IngestOptions options;
            options.center_root = !no_center;
            Dataset ds = ingest(kind, root_path, options, &warnings);
            if (target_frames >= 2)
                for (auto& s : ds.samples) s.sequence = resample_temporal(s.sequence, target_frames);
            auto summary = export_canonical(ds, out);
            print_warnings(warnings);
            json report;
            report["samples"] = summary.sample_count;
            report["per_type"] = summary.per_type;
            report["path"] = summary.path.string();
            std::cout << report.dump(2) << "\n";
        } else if (*synth) {
            fs::path out = apply_out_root(out_path);
            ensure_fresh_dir(out, force);
            SyntheticConfig cfg;
            cfg.types = synth_types;
            cfg.samples_per_type = synth_per_type;
            cfg.frames = synth_frames;
            cfg.seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : 0;
            Dataset ds = synth_regression ? make_synthetic_regression(cfg)
                                          : make_synthetic_classification(cfg);
            auto summary = export_canonical(ds, out);
            std::cout << "wrote " << summary.sample_count << " samples to " << out.string() << "\n";
        } else if (*train) {
            RunSettings s =
                config_path.empty() ? RunSettings{} : settings_from_config(load_json_file(config_path));
            if (seed >= 0) s.train.seed = static_cast<std::uint64_t>(seed);
            if (epochs > 0) s.train.epochs = epochs;
            if (batch > 0) s.train.batch_tuples = batch;
            if (lr > 0) s.train.learning_rate = lr;
            if (temperature > 0) s.train.temperature = temperature;
            if (checkpoint_every >= 0) s.train.checkpoint_every = checkpoint_every;
            if (!loss_mode_str.empty()) s.train.loss.denominator_mode = parse_denominator_mode(loss_mode_str);
            if (use_ri) s.train.use_ri = true;

            fs::path out = apply_out_root(out_path);
            ensure_fresh_dir(out, force);
            s.train.checkpoint_dir = out;
            Dataset ds = load_canonical(data_dir);
            write_json_file(out / "resolved_config.json", settings_to_config(s));

            auto result = train_contrastive(ds, s.train, s.encoder, s.projection);
            write_epoch_log(out / "train_log.jsonl", result.log);
            save_checkpoint(result.state, out / "model.ckpt");
            std::cout << "final epoch loss " << result.log.back().loss << "; checkpoint at "
                      << (out / "model.ckpt").string() << "\n";
        } else if (*transfer) {
            RunSettings s =
                config_path.empty() ? RunSettings{} : settings_from_config(load_json_file(config_path));
            if (seed >= 0) s.train.seed = static_cast<std::uint64_t>(seed);
            if (epochs > 0) s.train.epochs = epochs;
            if (batch > 0) s.train.batch_tuples = batch;
            if (lr > 0) s.train.learning_rate = lr;

            fs::path out = apply_out_root(out_path);
            ensure_fresh_dir(out, force);
            Dataset target = load_canonical(data_dir);
            if (!exercise.empty()) {
                Dataset filtered;
                filtered.graph = target.graph;
                filtered.name = target.name;
                for (const auto& sample : target.samples)
                    if (sample.exercise_type == exercise) filtered.samples.push_back(sample);
                if (filtered.samples.empty())
                    throw ArgumentError("no samples of exercise type '" + exercise + "' in " + data_dir);
                target = std::move(filtered);
            }
            std::optional<Dataset> validation;
            if (!validation_dir.empty()) validation = load_canonical(validation_dir);

            ModelState base;
            if (from_scratch) {
                const auto& first = target.samples.front().sequence;
                ModelState probe = load_checkpoint(checkpoint_path);
                base = ModelState::create(target.graph, probe.encoder_config(),
                                          probe.projection_config(),
                                          s.train.seed ^ 0xabcdef, static_cast<int>(first.channel_count()));
                base.meta().canonical_frames = first.frame_count();
            } else {
                base = load_checkpoint(checkpoint_path);
            }
            RegressionHeadConfig head;
            head.freeze_encoder = !no_freeze && !from_scratch;
            write_json_file(out / "resolved_config.json", settings_to_config(s));

            auto result = transfer_to_regression(base, target, head, s.train,
                                                 validation ? &*validation : nullptr);
            write_regression_log(out / "transfer_log.jsonl", result.log);
            save_checkpoint(result.state, out / "model.ckpt");

            json report;
            report["final_train_mse"] = result.log.back().train_mse;
            if (result.log.back().val_mse) {
                report["final_val_mse"] = *result.log.back().val_mse;
                auto preds = predict_scores(result.state, *validation);
                std::vector<double> truth;
                for (const auto& sample : validation->samples) truth.push_back(*sample.clinical_score);
                try {
                    report["val_spearman"] = spearman(preds, truth);
                } catch (const MetricError& e) {
                    report["val_spearman"] = nullptr;
                    report["val_spearman_error"] = e.what();
                }
            }
            write_json_file(out / "report.json", report);
            std::cout << report.dump(2) << "\n";
        } else if (*calibrate) {
            ModelState state = load_checkpoint(checkpoint_path);
            Dataset ds = load_canonical(data_dir);
            HeadMode mode = head_mode_str.empty() ? HeadMode::with_projection
                                                  : parse_head_mode(head_mode_str);
            ReferenceOptions options;
            if (epsilon > 0) options.variance_epsilon = epsilon;
            Warnings warnings;
            ReferenceSet refs = build_reference_set(state, ds, mode, options, &warnings);
            if (!no_calibrate) refs = calibrate_thresholds(state, refs, ds, &warnings);
            refs.checkpoint_id = fs::path(checkpoint_path).filename().string();
            print_warnings(warnings);
            fs::path out = apply_out_root(out_path);
            if (out.has_parent_path()) fs::create_directories(out.parent_path());
            refs.save(out);
            std::cout << "wrote " << refs.references.size() << " references to " << out.string() << "\n";
        } else if (*infer) {
            ModelState state = load_checkpoint(checkpoint_path);
            ReferenceSet refs = ReferenceSet::load(refs_path);
            Dataset ds = load_canonical(data_dir);
            auto scores = score_dataset(state, refs, ds);
            fs::path out = apply_out_root(out_path);
            if (out.has_parent_path()) fs::create_directories(out.parent_path());
            std::ofstream file(out);
            if (!file) throw IoError("cannot write " + out.string());
            for (size_t i = 0; i < ds.samples.size(); ++i) {
                const auto& sample = ds.samples[i];
                double theta = refs.thresholds.count(sample.exercise_type)
                                   ? refs.thresholds.at(sample.exercise_type)
                                   : 0.5;
                json rec;
                rec["id"] = sample.id;
                rec["exercise_type"] = sample.exercise_type;
                rec["score"] = scores[i];
                rec["threshold"] = theta;
                rec["decision"] = to_string(classify(scores[i], theta));
                if (sample.assessment) rec["truth"] = to_string(*sample.assessment);
                file << rec.dump() << "\n";
            }
            std::cout << "wrote " << ds.samples.size() << " predictions to " << out.string() << "\n";
        } else if (*eval_cmd) {
            RunSettings s =
                config_path.empty() ? RunSettings{} : settings_from_config(load_json_file(config_path));
            if (!protocol_str.empty()) s.protocol = parse_split_scheme(protocol_str);
            if (seed >= 0) s.eval_seed = static_cast<std::uint64_t>(seed);
            if (!head_mode_str.empty()) s.head_mode = parse_head_mode(head_mode_str);

            ModelState state = load_checkpoint(checkpoint_path);
            Dataset ds = load_canonical(data_dir);
            fs::path out = apply_out_root(out_path);
            ensure_fresh_dir(out, force);
            Warnings warnings;
            EvalReport report;
            if (!refs_path.empty()) {
                ReferenceSet refs = ReferenceSet::load(refs_path);
                report = evaluate(state, refs, ds, s.protocol, s.eval_seed);
            } else {
                ProtocolOptions options;
                options.head_mode = s.head_mode;
                options.variance_epsilon = s.variance_epsilon;
                report = evaluate_protocol(state, ds, s.protocol, s.eval_seed, options, &warnings);
            }
            print_warnings(warnings);
            write_json_file(out / "report.json", json::parse(report.to_json_string()));
            {
                std::ofstream table(out / "report.txt");
                table << report.to_table();
            }
            write_json_file(out / "resolved_config.json", settings_to_config(s));
            std::cout << report.to_table();
        } else if (*embed) {
            ModelState state = load_checkpoint(checkpoint_path);
            Dataset ds = load_canonical(data_dir);
            EmbeddingExportOptions options;
            if (!head_mode_str.empty()) options.head_mode = parse_head_mode(head_mode_str);
            options.project_2d = project_2d;
            options.perplexity = perplexity;
            if (seed >= 0) options.seed = static_cast<std::uint64_t>(seed);
            ReferenceSet refs;
            if (!refs_path.empty()) {
                refs = ReferenceSet::load(refs_path);
                options.refs = &refs;
            }
            fs::path out = apply_out_root(out_path);
            if (out.has_parent_path()) fs::create_directories(out.parent_path());
            export_embeddings(state, ds, out, options);
            std::cout << "wrote embeddings for " << ds.samples.size() << " samples to " << out.string()
                      << "\n";
        } else if (*plot) {
            fs::path out = apply_out_root(out_path);
            if (out.has_parent_path()) fs::create_directories(out.parent_path());
            if (!log_path.empty()) plot_loss_curves(log_path, out);
            else if (!embeddings_path.empty())
                plot_projection(embeddings_path, out, perplexity,
                                seed >= 0 ? static_cast<std::uint64_t>(seed) : 0);
            else throw ArgumentError("plot: provide --log or --embeddings");
            std::cout << "wrote " << out.string() << "\n";
        }
    } catch (const std::exception& e) {
        bool usage = dynamic_cast<const ArgumentError*>(&e) != nullptr ||
                     dynamic_cast<const IngestError*>(&e) != nullptr;
        if (error_json) {
            json err;
            err["error"] = e.what();
            err["kind"] = usage ? "usage" : "runtime";
            std::cerr << err.dump() << "\n";
        } else {
            std::cerr << "error: " << e.what() << "\n";
        }
        return usage ? 2 : 1;
    }
    return 0;
}
