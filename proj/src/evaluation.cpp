#include "rehabcl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rehabcl {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Metrics

double accuracy(const std::vector<Assessment>& predictions, const std::vector<Assessment>& truth) {
    if (predictions.size() != truth.size()) throw ArgumentError("accuracy: length mismatch");
    if (predictions.empty()) throw ArgumentError("accuracy: empty input");
    long hits = 0;
    for (size_t i = 0; i < truth.size(); ++i)
        if (predictions[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
    const size_t n = values.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double auc_roc(const std::vector<double>& scores, const std::vector<Assessment>& truth) {
    if (scores.size() != truth.size()) throw ArgumentError("auc_roc: length mismatch");
    long pos = 0, neg = 0;
    for (auto t : truth) (t == Assessment::correct ? pos : neg) += 1;
    if (pos == 0 || neg == 0) throw MetricError("auc_roc undefined: needs both classes");
    // Mann-Whitney via average ranks: ties contribute half automatically.
    auto ranks = average_ranks(scores);
    double rank_sum_pos = 0;
    for (size_t i = 0; i < truth.size(); ++i)
        if (truth[i] == Assessment::correct) rank_sum_pos += ranks[i];
    const double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

double auc_pr(const std::vector<double>& scores, const std::vector<Assessment>& truth) {
    if (scores.size() != truth.size()) throw ArgumentError("auc_pr: length mismatch");
    long pos = 0;
    for (auto t : truth)
        if (t == Assessment::correct) ++pos;
    if (pos == 0) throw MetricError("auc_pr undefined: no positive samples");

    // Single descending sweep; tied scores are folded into one threshold step.
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    double ap = 0, prev_recall = 0;
    long tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (truth[order[j]] == Assessment::correct) ++tp;
            else ++fp;
            ++j;
        }
        double recall = static_cast<double>(tp) / static_cast<double>(pos);
        double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

double spearman(const std::vector<double>& pred_scores, const std::vector<double>& truth_scores) {
    if (pred_scores.size() != truth_scores.size()) throw ArgumentError("spearman: length mismatch");
    if (pred_scores.size() < 2) throw ArgumentError("spearman: need at least 2 pairs");
    auto constant = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    };
    if (constant(pred_scores) || constant(truth_scores))
        throw MetricError("spearman undefined: constant score vector");

    auto ra = average_ranks(pred_scores);
    auto rb = average_ranks(truth_scores);
    const double n = static_cast<double>(ra.size());
    double ma = 0, mb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

// ---------------------------------------------------------------------------
// Report assembly

namespace {

TypeMetrics metrics_for(const std::vector<double>& scores, const std::vector<Assessment>& truth,
                        const std::vector<Assessment>& predictions) {
    TypeMetrics m;
    m.sample_count = static_cast<long>(truth.size());
    try {
        m.accuracy = accuracy(predictions, truth);
    } catch (const Error& e) {
        m.errors.push_back(e.what());
    }
    try {
        m.auc_roc = auc_roc(scores, truth);
    } catch (const Error& e) {
        m.errors.push_back(e.what());
    }
    try {
        m.auc_pr = auc_pr(scores, truth);
    } catch (const Error& e) {
        m.errors.push_back(e.what());
    }
    return m;
}

EvalReport assemble_report(const std::map<std::string, std::vector<double>>& scores_by_type,
                           const std::map<std::string, std::vector<Assessment>>& truth_by_type,
                           const std::map<std::string, std::vector<Assessment>>& pred_by_type,
                           SplitScheme protocol, std::uint64_t seed) {
    EvalReport report;
    report.protocol = protocol;
    report.seed = seed;
    double acc_sum = 0, roc_sum = 0, pr_sum = 0;
    long acc_n = 0, roc_n = 0, pr_n = 0;
    for (const auto& [type, scores] : scores_by_type) {
        TypeMetrics m = metrics_for(scores, truth_by_type.at(type), pred_by_type.at(type));
        report.macro_average.sample_count += m.sample_count;
        if (m.accuracy) {
            acc_sum += *m.accuracy;
            ++acc_n;
        }
        if (m.auc_roc) {
            roc_sum += *m.auc_roc;
            ++roc_n;
        }
        if (m.auc_pr) {
            pr_sum += *m.auc_pr;
            ++pr_n;
        }
        report.per_exercise[type] = std::move(m);
    }
    if (acc_n > 0) report.macro_average.accuracy = acc_sum / acc_n;
    if (roc_n > 0) report.macro_average.auc_roc = roc_sum / roc_n;
    if (pr_n > 0) report.macro_average.auc_pr = pr_sum / pr_n;
    return report;
}

}  // namespace

EvalReport evaluate(const ModelState& state, const ReferenceSet& refs, const Dataset& data,
                    SplitScheme protocol, std::uint64_t seed) {
    if (data.samples.empty()) throw ArgumentError("evaluate: empty dataset");
    auto scores = score_dataset(state, refs, data);
    std::map<std::string, std::vector<double>> scores_by_type;
    std::map<std::string, std::vector<Assessment>> truth_by_type, pred_by_type;
    for (size_t i = 0; i < data.samples.size(); ++i) {
        const auto& s = data.samples[i];
        if (!s.assessment) throw ArgumentError("evaluate: sample '" + s.id + "' lacks a binary label");
        double theta = refs.thresholds.count(s.exercise_type) ? refs.thresholds.at(s.exercise_type) : 0.5;
        scores_by_type[s.exercise_type].push_back(scores[i]);
        truth_by_type[s.exercise_type].push_back(*s.assessment);
        pred_by_type[s.exercise_type].push_back(classify(scores[i], theta));
    }
    return assemble_report(scores_by_type, truth_by_type, pred_by_type, protocol, seed);
}

EvalReport evaluate_protocol(const ModelState& state, const Dataset& data, SplitScheme scheme,
                             std::uint64_t seed, const ProtocolOptions& options, Warnings* warnings) {
    auto folds = split(data, scheme, seed, {}, warnings);
    std::map<std::string, std::vector<double>> scores_by_type;
    std::map<std::string, std::vector<Assessment>> truth_by_type, pred_by_type;

    for (const auto& fold : folds) {
        ReferenceOptions ref_options;
        ref_options.variance_epsilon = options.variance_epsilon;
        ReferenceSet refs = build_reference_set(state, fold.train, options.head_mode, ref_options, warnings);
        if (options.calibrate) refs = calibrate_thresholds(state, refs, fold.train, warnings);

        for (const auto& sample : fold.validation.samples) {
            if (!sample.assessment)
                throw ArgumentError("evaluate_protocol: sample '" + sample.id + "' lacks a binary label");
            if (!refs.references.count(sample.exercise_type)) {
                warn(warnings, "no reference for type " + sample.exercise_type +
                                   " in this fold; sample " + sample.id + " skipped");
                continue;
            }
            double p_hat = score_sample(state, refs, sample);
            scores_by_type[sample.exercise_type].push_back(p_hat);
            truth_by_type[sample.exercise_type].push_back(*sample.assessment);
            pred_by_type[sample.exercise_type].push_back(
                classify(p_hat, refs.thresholds.at(sample.exercise_type)));
        }
    }
    if (scores_by_type.empty()) throw ArgumentError("evaluate_protocol: no scorable validation samples");
    return assemble_report(scores_by_type, truth_by_type, pred_by_type, scheme, seed);
}

namespace {

json metrics_to_json(const TypeMetrics& m) {
    json j;
    j["accuracy"] = m.accuracy ? json(*m.accuracy) : json(nullptr);
    j["auc_roc"] = m.auc_roc ? json(*m.auc_roc) : json(nullptr);
    j["auc_pr"] = m.auc_pr ? json(*m.auc_pr) : json(nullptr);
    j["sample_count"] = m.sample_count;
    if (!m.errors.empty()) j["errors"] = m.errors;
    return j;
}

}  // namespace

std::string EvalReport::to_json_string() const {
    json j;
    j["protocol"] = to_string(protocol);
    j["seed"] = seed;
    j["per_exercise"] = json::object();
    for (const auto& [type, m] : per_exercise) j["per_exercise"][type] = metrics_to_json(m);
    j["macro_average"] = metrics_to_json(macro_average);
    return j.dump(2);
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    auto cell = [](const std::optional<double>& v) {
        char buf[16];
        if (!v) return std::string("     -");
        std::snprintf(buf, sizeof buf, "%6.4f", *v);
        return std::string(buf);
    };
    out << "exercise  accuracy  auc_roc  auc_pr   n\n";
    for (const auto& [type, m] : per_exercise) {
        out << type;
        for (size_t i = type.size(); i < 10; ++i) out << ' ';
        out << cell(m.accuracy) << "    " << cell(m.auc_roc) << "  " << cell(m.auc_pr) << "  "
            << m.sample_count << "\n";
    }
    out << "average   " << cell(macro_average.accuracy) << "    " << cell(macro_average.auc_roc) << "  "
        << cell(macro_average.auc_pr) << "  " << macro_average.sample_count << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// t-SNE (exact, for the embedding-export figures)

std::vector<std::array<double, 2>> tsne_project(const Tensor& points, double perplexity,
                                                std::uint64_t seed, int iterations) {
    if (points.rank() != 2) throw ArgumentError("tsne_project: points must be N x d");
    const long n = points.dim(0), dim = points.dim(1);
    if (n < 3) throw ArgumentError("tsne_project: need at least 3 points");
    perplexity = std::min(perplexity, static_cast<double>(n - 1) / 3.0);

    // Pairwise squared distances.
    std::vector<double> d2(static_cast<size_t>(n * n), 0.0);
    for (long i = 0; i < n; ++i)
        for (long j = i + 1; j < n; ++j) {
            double s = 0;
            for (long k = 0; k < dim; ++k) {
                double diff = points(i, k) - points(j, k);
                s += diff * diff;
            }
            d2[static_cast<size_t>(i * n + j)] = s;
            d2[static_cast<size_t>(j * n + i)] = s;
        }

    // Per-point precision via binary search on perplexity.
    std::vector<double> p(static_cast<size_t>(n * n), 0.0);
    const double log_perp = std::log(perplexity);
    for (long i = 0; i < n; ++i) {
        double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 64; ++it) {
            double sum = 0, sum_dp = 0;
            for (long j = 0; j < n; ++j) {
                if (j == i) continue;
                double pij = std::exp(-beta * d2[static_cast<size_t>(i * n + j)]);
                sum += pij;
                sum_dp += pij * d2[static_cast<size_t>(i * n + j)];
            }
            double entropy = sum > 0 ? std::log(sum) + beta * sum_dp / sum : 0.0;
            double diff = entropy - log_perp;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0) {
                beta_lo = beta;
                beta = std::isfinite(beta_hi) ? 0.5 * (beta + beta_hi) : beta * 2.0;
            } else {
                beta_hi = beta;
                beta = 0.5 * (beta + beta_lo);
            }
        }
        double sum = 0;
        for (long j = 0; j < n; ++j) {
            if (j == i) continue;
            double pij = std::exp(-beta * d2[static_cast<size_t>(i * n + j)]);
            p[static_cast<size_t>(i * n + j)] = pij;
            sum += pij;
        }
        if (sum <= 0) sum = 1;
        for (long j = 0; j < n; ++j) p[static_cast<size_t>(i * n + j)] /= sum;
    }
    // Symmetrize.
    std::vector<double> pj(static_cast<size_t>(n * n), 0.0);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
            pj[static_cast<size_t>(i * n + j)] =
                std::max((p[static_cast<size_t>(i * n + j)] + p[static_cast<size_t>(j * n + i)]) /
                             (2.0 * n),
                         1e-12);

    Rng rng(seed);
    std::normal_distribution<double> init(0.0, 1e-4);
    std::vector<std::array<double, 2>> y(static_cast<size_t>(n));
    for (auto& row : y) row = {init(rng), init(rng)};
    std::vector<std::array<double, 2>> velocity(static_cast<size_t>(n), {0, 0});
    std::vector<std::array<double, 2>> grad(static_cast<size_t>(n));

    const int exaggeration_end = std::min(100, iterations / 4);
    for (int it = 0; it < iterations; ++it) {
        const double exaggeration = it < exaggeration_end ? 12.0 : 1.0;
        const double momentum = it < 250 ? 0.5 : 0.8;

        double q_sum = 0;
        std::vector<double> q(static_cast<size_t>(n * n), 0.0);
        for (long i = 0; i < n; ++i)
            for (long j = i + 1; j < n; ++j) {
                double dx = y[static_cast<size_t>(i)][0] - y[static_cast<size_t>(j)][0];
                double dy = y[static_cast<size_t>(i)][1] - y[static_cast<size_t>(j)][1];
                double w = 1.0 / (1.0 + dx * dx + dy * dy);
                q[static_cast<size_t>(i * n + j)] = w;
                q[static_cast<size_t>(j * n + i)] = w;
                q_sum += 2.0 * w;
            }

        for (auto& g : grad) g = {0, 0};
        for (long i = 0; i < n; ++i)
            for (long j = 0; j < n; ++j) {
                if (i == j) continue;
                double w = q[static_cast<size_t>(i * n + j)];
                double qij = std::max(w / q_sum, 1e-12);
                double coeff =
                    4.0 * (exaggeration * pj[static_cast<size_t>(i * n + j)] - qij) * w;
                grad[static_cast<size_t>(i)][0] +=
                    coeff * (y[static_cast<size_t>(i)][0] - y[static_cast<size_t>(j)][0]);
                grad[static_cast<size_t>(i)][1] +=
                    coeff * (y[static_cast<size_t>(i)][1] - y[static_cast<size_t>(j)][1]);
            }
        for (long i = 0; i < n; ++i) {
            velocity[static_cast<size_t>(i)][0] =
                momentum * velocity[static_cast<size_t>(i)][0] - 200.0 * grad[static_cast<size_t>(i)][0];
            velocity[static_cast<size_t>(i)][1] =
                momentum * velocity[static_cast<size_t>(i)][1] - 200.0 * grad[static_cast<size_t>(i)][1];
            y[static_cast<size_t>(i)][0] += velocity[static_cast<size_t>(i)][0];
            y[static_cast<size_t>(i)][1] += velocity[static_cast<size_t>(i)][1];
        }
    }
    return y;
}

// ---------------------------------------------------------------------------
// Embedding export

void export_embeddings(const ModelState& state, const Dataset& data,
                       const std::filesystem::path& out_path, const EmbeddingExportOptions& options) {
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write " + out_path.string());

    const bool with_projection = options.head_mode == HeadMode::with_projection;
    long dim = with_projection ? state.projection_config().out_dim : state.encoder_config().embedding_dim;

    std::vector<std::vector<double>> rows;
    std::vector<std::array<std::string, 3>> row_info;  // id, type, assessment
    for (const auto& s : data.samples) {
        const auto& seq = s.sequence;
        Tensor views({1, seq.frame_count(), seq.joint_count(), seq.channel_count()});
        std::copy(seq.frames.raw().begin(), seq.frames.raw().end(), views.data());
        Tensor emb = state.embed(views, with_projection);
        rows.emplace_back(emb.data(), emb.data() + dim);
        std::string assess = s.assessment ? to_string(*s.assessment)
                                          : std::to_string(*s.clinical_score);
        row_info.push_back({s.id, s.exercise_type, assess});
    }
    if (options.refs) {
        for (const auto& [type, vec] : options.refs->references) {
            if (static_cast<long>(vec.size()) != dim)
                throw ArgumentError("export_embeddings: reference dimension does not match head mode");
            rows.push_back(vec);
            row_info.push_back({"ref:" + type, type, "ref"});
        }
    }

    std::vector<std::array<double, 2>> projection;
    if (options.project_2d && rows.size() >= 3) {
        Tensor points({static_cast<long>(rows.size()), dim});
        for (size_t r = 0; r < rows.size(); ++r)
            std::copy(rows[r].begin(), rows[r].end(), points.data() + static_cast<long>(r) * dim);
        projection = tsne_project(points, options.perplexity, options.seed);
    }

    out << "id\texercise_type\tassessment";
    for (long d = 0; d < dim; ++d) out << "\te" << d;
    if (!projection.empty()) out << "\tproj_x\tproj_y";
    out << "\n";
    char buf[32];
    for (size_t r = 0; r < rows.size(); ++r) {
        out << row_info[r][0] << "\t" << row_info[r][1] << "\t" << row_info[r][2];
        for (double v : rows[r]) {
            std::snprintf(buf, sizeof buf, "%.9g", v);
            out << "\t" << buf;
        }
        if (!projection.empty()) {
            std::snprintf(buf, sizeof buf, "%.9g", projection[r][0]);
            out << "\t" << buf;
            std::snprintf(buf, sizeof buf, "%.9g", projection[r][1]);
            out << "\t" << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("failed writing " + out_path.string());
}

// ---------------------------------------------------------------------------
// SVM probe (SMO on the RBF kernel)

namespace {

struct SvmModel {
    std::vector<double> alpha;
    std::vector<double> y;  // +1 / -1
    Tensor x;
    double b = 0;
    double gamma = 0;
};

double rbf(const Tensor& a, long i, const Tensor& bten, long j, double gamma) {
    double s = 0;
    const long dim = a.dim(1);
    for (long k = 0; k < dim; ++k) {
        double diff = a(i, k) - bten(j, k);
        s += diff * diff;
    }
    return std::exp(-gamma * s);
}

double svm_decision(const SvmModel& m, const Tensor& points, long row) {
    double s = -m.b;
    for (size_t i = 0; i < m.alpha.size(); ++i)
        if (m.alpha[i] > 0) s += m.alpha[i] * m.y[i] * rbf(m.x, static_cast<long>(i), points, row, m.gamma);
    return s;
}

}  // namespace

double svm_probe(const Tensor& train_embeddings, const std::vector<Assessment>& train_labels,
                 const Tensor& val_embeddings, const std::vector<Assessment>& val_labels, double c,
                 double gamma) {
    if (train_embeddings.rank() != 2 || val_embeddings.rank() != 2)
        throw ArgumentError("svm_probe: embeddings must be N x d");
    const long n = train_embeddings.dim(0);
    if (n != static_cast<long>(train_labels.size()) ||
        val_embeddings.dim(0) != static_cast<long>(val_labels.size()))
        throw ArgumentError("svm_probe: label count mismatch");
    long pos = 0;
    for (auto l : train_labels)
        if (l == Assessment::correct) ++pos;
    if (pos == 0 || pos == n) throw ArgumentError("svm_probe: training labels must contain both classes");

    SvmModel model;
    model.x = train_embeddings;
    model.gamma = gamma;
    model.alpha.assign(static_cast<size_t>(n), 0.0);
    model.y.resize(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i)
        model.y[static_cast<size_t>(i)] = train_labels[static_cast<size_t>(i)] == Assessment::correct ? 1.0 : -1.0;

    // Precomputed kernel matrix (probe-sized problems only).
    std::vector<double> kernel(static_cast<size_t>(n * n));
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
            kernel[static_cast<size_t>(i * n + j)] = rbf(train_embeddings, i, train_embeddings, j, gamma);

    auto decision = [&](long i) {
        double s = -model.b;
        for (long j = 0; j < n; ++j)
            if (model.alpha[static_cast<size_t>(j)] > 0)
                s += model.alpha[static_cast<size_t>(j)] * model.y[static_cast<size_t>(j)] *
                     kernel[static_cast<size_t>(j * n + i)];
        return s;
    };

    // Simplified SMO (Platt): pick violating pairs until a full quiet pass.
    const double tol = 1e-3, eps_alpha = 1e-8;
    Rng rng(12345);
    int quiet_passes = 0, max_iters = 200;
    for (int iter = 0; iter < max_iters && quiet_passes < 2; ++iter) {
        int changed = 0;
        for (long i = 0; i < n; ++i) {
            double yi = model.y[static_cast<size_t>(i)];
            double ei = decision(i) - yi;
            bool violates = (yi * ei < -tol && model.alpha[static_cast<size_t>(i)] < c) ||
                            (yi * ei > tol && model.alpha[static_cast<size_t>(i)] > 0);
            if (!violates) continue;
            long j = static_cast<long>(rng() % static_cast<std::uint64_t>(n - 1));
            if (j >= i) ++j;
            double yj = model.y[static_cast<size_t>(j)];
            double ej = decision(j) - yj;
            double ai_old = model.alpha[static_cast<size_t>(i)], aj_old = model.alpha[static_cast<size_t>(j)];
            double lo, hi;
            if (yi != yj) {
                lo = std::max(0.0, aj_old - ai_old);
                hi = std::min(c, c + aj_old - ai_old);
            } else {
                lo = std::max(0.0, ai_old + aj_old - c);
                hi = std::min(c, ai_old + aj_old);
            }
            if (lo >= hi) continue;
            double eta = 2.0 * kernel[static_cast<size_t>(i * n + j)] -
                         kernel[static_cast<size_t>(i * n + i)] - kernel[static_cast<size_t>(j * n + j)];
            if (eta >= 0) continue;
            double aj = aj_old - yj * (ei - ej) / eta;
            aj = std::clamp(aj, lo, hi);
            if (std::abs(aj - aj_old) < eps_alpha) continue;
            double ai = ai_old + yi * yj * (aj_old - aj);
            model.alpha[static_cast<size_t>(i)] = ai;
            model.alpha[static_cast<size_t>(j)] = aj;
            double b1 = model.b + ei + yi * (ai - ai_old) * kernel[static_cast<size_t>(i * n + i)] +
                        yj * (aj - aj_old) * kernel[static_cast<size_t>(i * n + j)];
            double b2 = model.b + ej + yi * (ai - ai_old) * kernel[static_cast<size_t>(i * n + j)] +
                        yj * (aj - aj_old) * kernel[static_cast<size_t>(j * n + j)];
            if (ai > 0 && ai < c) model.b = b1;
            else if (aj > 0 && aj < c) model.b = b2;
            else model.b = 0.5 * (b1 + b2);
            ++changed;
        }
        quiet_passes = changed == 0 ? quiet_passes + 1 : 0;
    }

    long hits = 0;
    for (long r = 0; r < val_embeddings.dim(0); ++r) {
        double score = svm_decision(model, val_embeddings, r);
        Assessment predicted = score >= 0 ? Assessment::correct : Assessment::incorrect;
        if (predicted == val_labels[static_cast<size_t>(r)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(val_labels.size());
}

}  // namespace rehabcl
