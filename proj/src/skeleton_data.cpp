#include "rehabcl/skeleton_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <queue>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace rehabcl {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// SkeletonGraph

void SkeletonGraph::validate() const {
    if (joint_count <= 0) throw ArgumentError("SkeletonGraph: joint_count must be positive");
    if (root_joint < 0 || root_joint >= joint_count)
        throw ArgumentError("SkeletonGraph: root_joint out of range");
    std::set<std::pair<int, int>> seen;
    for (auto [a, b] : edges) {
        if (a < 0 || a >= joint_count || b < 0 || b >= joint_count)
            throw ArgumentError("SkeletonGraph: edge endpoint out of range");
        if (a == b) throw ArgumentError("SkeletonGraph: self-loop edge");
        auto key = std::minmax(a, b);
        if (!seen.insert(key).second) throw ArgumentError("SkeletonGraph: duplicate edge");
    }
    hop_distance_from_root();  // throws if disconnected
}

std::vector<int> SkeletonGraph::hop_distance_from_root() const {
    std::vector<std::vector<int>> adj(static_cast<size_t>(joint_count));
    for (auto [a, b] : edges) {
        adj[static_cast<size_t>(a)].push_back(b);
        adj[static_cast<size_t>(b)].push_back(a);
    }
    std::vector<int> dist(static_cast<size_t>(joint_count), -1);
    std::queue<int> queue;
    dist[static_cast<size_t>(root_joint)] = 0;
    queue.push(root_joint);
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop();
        for (int w : adj[static_cast<size_t>(v)]) {
            if (dist[static_cast<size_t>(w)] < 0) {
                dist[static_cast<size_t>(w)] = dist[static_cast<size_t>(v)] + 1;
                queue.push(w);
            }
        }
    }
    for (int d : dist)
        if (d < 0) throw ArgumentError("SkeletonGraph: graph is disconnected (joint unreachable from root)");
    return dist;
}

SkeletonGraph SkeletonGraph::kinect_one() {
    // Kinect One (v2) joint order: 0 SpineBase, 1 SpineMid, 2 Neck, 3 Head,
    // 4-7 left arm, 8-11 right arm, 12-15 left leg, 16-19 right leg,
    // 20 SpineShoulder, 21/22 left hand tip/thumb, 23/24 right hand tip/thumb.
    SkeletonGraph g;
    g.joint_count = 25;
    g.root_joint = 0;
    g.edges = {{0, 1},   {1, 20},  {20, 2},  {2, 3},   {20, 4},  {4, 5},   {5, 6},   {6, 7},
               {20, 8},  {8, 9},   {9, 10},  {10, 11}, {0, 12},  {12, 13}, {13, 14}, {14, 15},
               {0, 16},  {16, 17}, {17, 18}, {18, 19}, {7, 21},  {7, 22},  {11, 23}, {11, 24}};
    return g;
}

SkeletonGraph SkeletonGraph::uiprmd_kinect() {
    // UI-PRMD Kinect position files, 22 joints: 0 waist, 1 spine, 2 chest,
    // 3 neck, 4 head, 5 head tip, 6-9 left arm chain, 10-13 right arm chain,
    // 14-17 left leg chain, 18-21 right leg chain.
    SkeletonGraph g;
    g.joint_count = 22;
    g.root_joint = 0;
    g.edges = {{0, 1},   {1, 2},   {2, 3},   {3, 4},   {4, 5},   {2, 6},   {6, 7},
               {7, 8},   {8, 9},   {2, 10},  {10, 11}, {11, 12}, {12, 13}, {0, 14},
               {14, 15}, {15, 16}, {16, 17}, {0, 18},  {18, 19}, {19, 20}, {20, 21}};
    return g;
}

// ---------------------------------------------------------------------------
// Sequence / sample / dataset validation

void SkeletonSequence::validate(int expected_joints) const {
    if (frames.rank() != 3) throw ArgumentError("SkeletonSequence: frames must be T x J x C");
    if (frame_count() < 2) throw ArgumentError("SkeletonSequence: need at least 2 frames");
    if (channel_count() < 2) throw ArgumentError("SkeletonSequence: need at least 2 channels");
    if (expected_joints >= 0 && joint_count() != expected_joints)
        throw ArgumentError("SkeletonSequence: joint count does not match graph");
    if (fps <= 0) throw ArgumentError("SkeletonSequence: fps must be positive");
    if (!frames.all_finite()) throw ArgumentError("SkeletonSequence: non-finite coordinate");
}

void LabeledSample::validate() const {
    if (assessment.has_value() == clinical_score.has_value())
        throw ArgumentError("LabeledSample '" + id +
                            "': exactly one of assessment or clinical_score must be present");
    if (clinical_score && (*clinical_score < 0.0 || *clinical_score > 50.0))
        throw ArgumentError("LabeledSample '" + id + "': clinical_score outside [0, 50]");
    if (exercise_type.empty()) throw ArgumentError("LabeledSample '" + id + "': empty exercise_type");
}

void Dataset::validate() const {
    graph.validate();
    for (const auto& s : samples) {
        s.validate();
        s.sequence.validate(graph.joint_count);
    }
}

std::vector<std::string> Dataset::exercise_types() const {
    std::set<std::string> types;
    for (const auto& s : samples) types.insert(s.exercise_type);
    return {types.begin(), types.end()};
}

DatasetKind parse_dataset_kind(const std::string& s) {
    if (s == "uiprmd") return DatasetKind::uiprmd;
    if (s == "irds") return DatasetKind::irds;
    if (s == "kimore") return DatasetKind::kimore;
    if (s == "canonical") return DatasetKind::canonical;
    throw ArgumentError("unknown dataset kind: '" + s + "' (expected uiprmd, irds, kimore or canonical)");
}

// ---------------------------------------------------------------------------
// Temporal re-sampling and normalization

SkeletonSequence resample_temporal(const SkeletonSequence& sequence, long target_length) {
    sequence.validate();
    if (target_length < 2) throw ArgumentError("resample_temporal: target_length must be >= 2");
    const long t_in = sequence.frame_count();
    const long joints = sequence.joint_count();
    const long channels = sequence.channel_count();

    SkeletonSequence out;
    out.fps = sequence.fps;
    out.frames = Tensor({target_length, joints, channels});
    if (target_length == t_in) {
        out.frames = sequence.frames;
        return out;
    }
    const double step = static_cast<double>(t_in - 1) / static_cast<double>(target_length - 1);
    for (long t = 0; t < target_length; ++t) {
        double pos = (t == target_length - 1) ? static_cast<double>(t_in - 1) : t * step;
        long lo = static_cast<long>(std::floor(pos));
        long hi = std::min(lo + 1, t_in - 1);
        double frac = pos - static_cast<double>(lo);
        for (long j = 0; j < joints; ++j)
            for (long c = 0; c < channels; ++c)
                out.frames(t, j, c) =
                    (1.0 - frac) * sequence.frames(lo, j, c) + frac * sequence.frames(hi, j, c);
    }
    return out;
}

void center_root_joint(SkeletonSequence& sequence, int root_joint) {
    const long t_count = sequence.frame_count();
    const long joints = sequence.joint_count();
    const long spatial = std::min<long>(sequence.channel_count(), 3);
    for (long t = 0; t < t_count; ++t) {
        for (long c = 0; c < spatial; ++c) {
            const double origin = sequence.frames(t, root_joint, c);
            for (long j = 0; j < joints; ++j) sequence.frames(t, j, c) -= origin;
        }
    }
}

// ---------------------------------------------------------------------------
// Raw file parsing helpers

namespace {

std::vector<double> parse_numeric_row(const std::string& line, const fs::path& file, long line_no) {
    std::vector<double> values;
    const char* p = line.c_str();
    const char* end = p + line.size();
    while (p < end) {
        while (p < end && (*p == ' ' || *p == '\t' || *p == ',' || *p == ';' || *p == '\r')) ++p;
        if (p >= end) break;
        double v = 0.0;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc()) {
            // from_chars does not accept "nan"/"inf" spellings everywhere; fall back.
            char* fallback_end = nullptr;
            v = std::strtod(p, &fallback_end);
            if (fallback_end == p)
                throw ParseError("malformed numeric row in " + file.string() + " at line " +
                                 std::to_string(line_no));
            next = fallback_end;
        }
        values.push_back(v);
        p = next;
    }
    return values;
}

// Reads a whitespace/comma separated matrix of frames. expected_width < 0
// accepts any consistent width.
std::vector<std::vector<double>> read_frame_matrix(const fs::path& file, long expected_width) {
    std::ifstream in(file);
    if (!in) throw IngestError("cannot open file: " + file.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto values = parse_numeric_row(line, file, line_no);
        if (values.empty()) continue;
        if (expected_width >= 0 && static_cast<long>(values.size()) != expected_width)
            throw ParseError("row width " + std::to_string(values.size()) + " (expected " +
                             std::to_string(expected_width) + ") in " + file.string() + " at line " +
                             std::to_string(line_no));
        if (!rows.empty() && rows.back().size() != values.size())
            throw ParseError("inconsistent row width in " + file.string() + " at line " +
                             std::to_string(line_no));
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw IngestError("no frames in file: " + file.string());
    return rows;
}

// Repairs non-finite values per joint-channel track by linear interpolation
// between the nearest finite frames; edge gaps copy the nearest finite value.
// Returns false when some track has no finite value at all.
bool repair_nonfinite(Tensor& frames) {
    const long t_count = frames.dim(0), joints = frames.dim(1), channels = frames.dim(2);
    for (long j = 0; j < joints; ++j) {
        for (long c = 0; c < channels; ++c) {
            std::vector<long> finite;
            for (long t = 0; t < t_count; ++t)
                if (std::isfinite(frames(t, j, c))) finite.push_back(t);
            if (finite.empty()) return false;
            if (static_cast<long>(finite.size()) == t_count) continue;
            for (long t = 0; t < t_count; ++t) {
                if (std::isfinite(frames(t, j, c))) continue;
                auto next = std::lower_bound(finite.begin(), finite.end(), t);
                if (next == finite.begin()) {
                    frames(t, j, c) = frames(finite.front(), j, c);
                } else if (next == finite.end()) {
                    frames(t, j, c) = frames(finite.back(), j, c);
                } else {
                    long hi = *next, lo = *(next - 1);
                    double frac = static_cast<double>(t - lo) / static_cast<double>(hi - lo);
                    frames(t, j, c) = (1.0 - frac) * frames(lo, j, c) + frac * frames(hi, j, c);
                }
            }
        }
    }
    return true;
}

Tensor frames_from_rows(const std::vector<std::vector<double>>& rows, long joints, long value_stride,
                        const fs::path& file) {
    const long t_count = static_cast<long>(rows.size());
    Tensor frames({t_count, joints, 3});
    for (long t = 0; t < t_count; ++t) {
        const auto& row = rows[static_cast<size_t>(t)];
        for (long j = 0; j < joints; ++j)
            for (long c = 0; c < 3; ++c)
                frames(t, j, c) = row[static_cast<size_t>(j * value_stride + c)];
    }
    if (!repair_nonfinite(frames))
        throw IngestError("joint track entirely non-finite in " + file.string());
    return frames;
}

int ingest_thread_count(const IngestOptions& options) {
    if (options.threads > 0) return options.threads;
    if (const char* env = std::getenv("REHABCL_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 8u));
}

// Parses every file with `parse` (in parallel, results kept in input order).
template <typename Item, typename Parse>
std::vector<LabeledSample> parse_files_parallel(const std::vector<Item>& items, int threads, Parse parse) {
    std::vector<LabeledSample> out(items.size());
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= items.size()) break;
            try {
                out[i] = parse(items[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    int n = std::min<int>(threads, static_cast<int>(items.size()));
    for (int i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

std::string two_digits(int v) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d", v);
    return buf;
}

// ---------------------------------------------------------------------------
// UI-PRMD adapter: segmented Kinect position files named
// mXX_sYY_eZZ_positions.txt ("_inc" suffix and/or an "Incorrect" path
// component marks incorrect executions). 22 joints x 3 coordinates per row.

Dataset ingest_uiprmd(const fs::path& root, const IngestOptions& options) {
    static const std::regex name_re(R"(m(\d+)_s(\d+)_e(\d+)_positions(_inc)?\.txt)");
    struct Entry {
        fs::path file;
        std::string type, subject, episode;
        bool incorrect;
    };
    std::vector<Entry> entries;
    for (const auto& it : fs::recursive_directory_iterator(root)) {
        if (!it.is_regular_file()) continue;
        std::smatch m;
        std::string name = it.path().filename().string();
        if (!std::regex_match(name, m, name_re)) continue;
        bool inc = m[4].matched;
        for (const auto& part : it.path())
            if (part.string().find("Incorrect") != std::string::npos) inc = true;
        entries.push_back({it.path(), "u" + two_digits(std::stoi(m[1])), "s" + two_digits(std::stoi(m[2])),
                           "e" + two_digits(std::stoi(m[3])), inc});
    }
    if (entries.empty())
        throw IngestError("no UI-PRMD position files (m*_s*_e*_positions*.txt) under " + root.string());
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.type, a.subject, a.episode, a.incorrect) <
               std::tie(b.type, b.subject, b.episode, b.incorrect);
    });

    Dataset ds;
    ds.name = "uiprmd";
    ds.graph = SkeletonGraph::uiprmd_kinect();
    const long joints = ds.graph.joint_count;
    ds.samples = parse_files_parallel(entries, ingest_thread_count(options), [&](const Entry& e) {
        auto rows = read_frame_matrix(e.file, joints * 3);
        LabeledSample s;
        s.sequence.frames = frames_from_rows(rows, joints, 3, e.file);
        s.sequence.fps = 30.0;
        s.exercise_type = e.type;
        s.assessment = e.incorrect ? Assessment::incorrect : Assessment::correct;
        s.subject_id = e.subject;
        s.id = e.type + "_" + e.subject + "_" + e.episode + (e.incorrect ? "_inc" : "");
        if (options.center_root) center_root_joint(s.sequence, ds.graph.root_joint);
        return s;
    });
    return ds;
}

// ---------------------------------------------------------------------------
// IRDS adapter: files named
// <subject>_<date>_<gesture>_<repetition>_<correctness>_<position>.txt with
// 25 joints x 3 coordinates per row (an optional leading timestamp column is
// dropped). GestureLabel is 0-based (0..8 -> i01..i09); correctness 1 is
// correct, 2 incorrect.

Dataset ingest_irds(const fs::path& root, const IngestOptions& options) {
    static const std::regex name_re(R"((\d+)_(\d+)_(\d+)_(\d+)_(\d+)_([A-Za-z]+)\.txt)");
    struct Entry {
        fs::path file;
        std::string type, subject, id;
        bool incorrect;
    };
    std::vector<Entry> entries;
    for (const auto& it : fs::recursive_directory_iterator(root)) {
        if (!it.is_regular_file()) continue;
        std::smatch m;
        std::string name = it.path().filename().string();
        if (!std::regex_match(name, m, name_re)) continue;
        int gesture = std::stoi(m[3]);
        int correctness = std::stoi(m[5]);
        if (gesture < 0 || gesture > 8)
            throw IngestError("IRDS gesture label out of range in " + it.path().string());
        if (correctness != 1 && correctness != 2)
            throw IngestError("IRDS correctness label must be 1 or 2 in " + it.path().string());
        Entry e;
        e.file = it.path();
        e.type = "i" + two_digits(gesture + 1);
        e.subject = m[1];
        e.incorrect = correctness == 2;
        e.id = e.type + "_" + std::string(m[1]) + "_" + std::string(m[2]) + "_" + std::string(m[4]) +
               (e.incorrect ? "_inc" : "");
        entries.push_back(std::move(e));
    }
    if (entries.empty())
        throw IngestError("no IRDS skeleton files (<subj>_<date>_<gesture>_<rep>_<label>_<pos>.txt) under " +
                          root.string());
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.id < b.id; });

    Dataset ds;
    ds.name = "irds";
    ds.graph = SkeletonGraph::kinect_one();
    const long joints = ds.graph.joint_count;
    ds.samples = parse_files_parallel(entries, ingest_thread_count(options), [&](const Entry& e) {
        auto rows = read_frame_matrix(e.file, -1);
        long width = static_cast<long>(rows.front().size());
        long offset = 0;
        if (width == joints * 3 + 1) offset = 1;  // leading timestamp
        else if (width != joints * 3)
            throw ParseError("unexpected IRDS row width " + std::to_string(width) + " in " +
                             e.file.string());
        std::vector<std::vector<double>> trimmed;
        if (offset == 0) {
            trimmed = std::move(rows);
        } else {
            trimmed.reserve(rows.size());
            for (auto& r : rows) trimmed.emplace_back(r.begin() + offset, r.end());
        }
        LabeledSample s;
        s.sequence.frames = frames_from_rows(trimmed, joints, 3, e.file);
        s.sequence.fps = 30.0;
        s.exercise_type = e.type;
        s.assessment = e.incorrect ? Assessment::incorrect : Assessment::correct;
        s.subject_id = e.subject;
        s.id = e.id;
        if (options.center_root) center_root_joint(s.sequence, ds.graph.root_joint);
        return s;
    });
    return ds;
}

// ---------------------------------------------------------------------------
// KIMORE adapter: JointPosition*.csv files under Es1..Es5 directories, 25
// joints per row with either 3 or 4 values per joint. Clinical scores come
// from a ClinicalAssessment*.csv next to the exercise tree (a plain CSV
// export of the published assessment sheet): one row per subject, first
// column the subject id, then the five exercise scores Es1..Es5.

std::map<std::string, std::array<double, 5>> load_kimore_scores(const fs::path& root) {
    std::map<std::string, std::array<double, 5>> scores;
    for (const auto& it : fs::recursive_directory_iterator(root)) {
        if (!it.is_regular_file()) continue;
        std::string name = it.path().filename().string();
        if (name.rfind("ClinicalAssessment", 0) != 0 || it.path().extension() != ".csv") continue;
        std::ifstream in(it.path());
        if (!in) throw IngestError("cannot open file: " + it.path().string());
        std::string line;
        long line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line.back() == '\r') {
                while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
            }
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string cell;
            std::vector<std::string> cells;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (cells.size() < 6) continue;
            std::array<double, 5> row{};
            bool numeric = true;
            for (int k = 0; k < 5; ++k) {
                try {
                    row[static_cast<size_t>(k)] = std::stod(cells[static_cast<size_t>(k) + 1]);
                } catch (...) {
                    numeric = false;  // header row
                    break;
                }
            }
            if (!numeric) continue;
            scores[cells[0]] = row;
        }
    }
    return scores;
}

Dataset ingest_kimore(const fs::path& root, const IngestOptions& options) {
    struct Entry {
        fs::path file;
        std::string type, subject, id;
        int exercise;  // 1..5
    };
    static const std::regex es_re(R"(Es([1-5]))");
    std::vector<Entry> entries;
    for (const auto& it : fs::recursive_directory_iterator(root)) {
        if (!it.is_regular_file()) continue;
        std::string name = it.path().filename().string();
        if (name.rfind("JointPosition", 0) != 0 || it.path().extension() != ".csv") continue;
        int exercise = 0;
        std::string subject;
        fs::path rel = fs::relative(it.path(), root);
        std::vector<std::string> parts;
        for (const auto& part : rel) parts.push_back(part.string());
        for (size_t i = 0; i < parts.size(); ++i) {
            std::smatch m;
            if (std::regex_match(parts[i], m, es_re)) {
                exercise = std::stoi(m[1]);
                subject = i > 0 ? parts[i - 1] : "unknown";
                break;
            }
        }
        if (exercise == 0)
            throw IngestError("JointPosition file outside an Es1..Es5 directory: " + it.path().string());
        Entry e;
        e.file = it.path();
        e.exercise = exercise;
        e.type = "k" + two_digits(exercise);
        e.subject = subject;
        e.id = e.type + "_" + subject + "_" + it.path().stem().string();
        entries.push_back(std::move(e));
    }
    if (entries.empty())
        throw IngestError("no KIMORE JointPosition*.csv files under " + root.string());
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.id < b.id; });

    auto scores = load_kimore_scores(root);
    if (scores.empty())
        throw IngestError("no ClinicalAssessment*.csv score files under " + root.string());

    Dataset ds;
    ds.name = "kimore";
    ds.graph = SkeletonGraph::kinect_one();
    const long joints = ds.graph.joint_count;
    ds.samples = parse_files_parallel(entries, ingest_thread_count(options), [&](const Entry& e) {
        auto it = scores.find(e.subject);
        if (it == scores.end())
            throw IngestError("no clinical score row for subject '" + e.subject + "' needed by " +
                              e.file.string());
        auto rows = read_frame_matrix(e.file, -1);
        long width = static_cast<long>(rows.front().size());
        long stride;
        if (width == joints * 3) stride = 3;
        else if (width >= joints * 4) stride = width / joints;  // x,y,z,extra per joint
        else
            throw ParseError("unexpected KIMORE row width " + std::to_string(width) + " in " +
                             e.file.string());
        LabeledSample s;
        s.sequence.frames = frames_from_rows(rows, joints, stride, e.file);
        s.sequence.fps = 30.0;
        s.exercise_type = e.type;
        s.clinical_score = it->second[static_cast<size_t>(e.exercise - 1)];
        if (*s.clinical_score < 0.0 || *s.clinical_score > 50.0)
            throw IngestError("clinical score outside [0,50] for subject '" + e.subject + "' exercise " +
                              e.type);
        s.subject_id = e.subject;
        s.id = e.id;
        if (options.center_root) center_root_joint(s.sequence, ds.graph.root_joint);
        return s;
    });
    return ds;
}

}  // namespace

// ---------------------------------------------------------------------------
// Canonical on-disk format

static std::string assessment_to_manifest(const LabeledSample& s) {
    return s.assessment == Assessment::correct ? "+" : "-";
}

ExportSummary export_canonical(const Dataset& dataset, const fs::path& out_path) {
    dataset.validate();
    long channels = -1;
    double fps = -1.0;
    for (const auto& s : dataset.samples) {
        if (channels < 0) {
            channels = s.sequence.channel_count();
            fps = s.sequence.fps;
        } else if (channels != s.sequence.channel_count() || fps != s.sequence.fps) {
            throw ArgumentError("export_canonical: samples must share channel count and fps");
        }
    }
    if (channels < 0) {
        channels = 3;
        fps = 30.0;
    }

    std::error_code ec;
    fs::create_directories(out_path / "frames", ec);
    if (ec) throw IoError("cannot create directory " + (out_path / "frames").string() + ": " + ec.message());

    json meta;
    meta["name"] = dataset.name;
    meta["joint_count"] = dataset.graph.joint_count;
    meta["channel_count"] = channels;
    meta["fps"] = fps;
    meta["root_joint"] = dataset.graph.root_joint;
    meta["edges"] = json::array();
    for (auto [a, b] : dataset.graph.edges) meta["edges"].push_back({a, b});
    {
        std::ofstream out(out_path / "meta.json");
        if (!out) throw IoError("cannot write " + (out_path / "meta.json").string());
        out << meta.dump(2) << "\n";
    }

    ExportSummary summary;
    summary.path = out_path;
    std::ofstream manifest(out_path / "manifest.jsonl");
    if (!manifest) throw IoError("cannot write " + (out_path / "manifest.jsonl").string());
    for (const auto& s : dataset.samples) {
        std::string frames_file = "frames/" + s.id + ".txt";
        json rec;
        rec["id"] = s.id;
        rec["exercise_type"] = s.exercise_type;
        if (s.assessment) rec["assessment"] = assessment_to_manifest(s);
        else rec["clinical_score"] = *s.clinical_score;
        rec["subject_id"] = s.subject_id;
        rec["frames_file"] = frames_file;
        rec["frame_count"] = s.sequence.frame_count();
        manifest << rec.dump() << "\n";

        std::ofstream fout(out_path / frames_file);
        if (!fout) throw IoError("cannot write " + (out_path / frames_file).string());
        char buf[32];
        const long t_count = s.sequence.frame_count(), joints = s.sequence.joint_count();
        for (long t = 0; t < t_count; ++t) {
            for (long j = 0; j < joints; ++j)
                for (long c = 0; c < channels; ++c) {
                    std::snprintf(buf, sizeof buf, "%.17g", s.sequence.frames(t, j, c));
                    fout << (j == 0 && c == 0 ? "" : " ") << buf;
                }
            fout << "\n";
        }
        if (!fout) throw IoError("failed writing " + (out_path / frames_file).string());
        summary.sample_count += 1;
        summary.per_type[s.exercise_type] += 1;
    }
    if (!manifest) throw IoError("failed writing " + (out_path / "manifest.jsonl").string());
    return summary;
}

Dataset ingest_canonical(const fs::path& root) {
    const fs::path meta_path = root / "meta.json";
    std::ifstream meta_in(meta_path);
    if (!meta_in) throw IngestError("cannot open file: " + meta_path.string());
    json meta;
    try {
        meta_in >> meta;
    } catch (const json::exception& e) {
        throw ParseError("invalid JSON in " + meta_path.string() + ": " + e.what());
    }

    Dataset ds;
    ds.name = meta.value("name", "canonical");
    ds.graph.joint_count = meta.at("joint_count").get<int>();
    ds.graph.root_joint = meta.at("root_joint").get<int>();
    for (const auto& e : meta.at("edges"))
        ds.graph.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    const long channels = meta.at("channel_count").get<long>();
    const double fps = meta.at("fps").get<double>();
    ds.graph.validate();

    const fs::path manifest_path = root / "manifest.jsonl";
    std::ifstream manifest(manifest_path);
    if (!manifest) throw IngestError("cannot open file: " + manifest_path.string());
    std::string line;
    long line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("invalid JSON in " + manifest_path.string() + " at line " +
                             std::to_string(line_no) + ": " + e.what());
        }
        LabeledSample s;
        s.id = rec.at("id").get<std::string>();
        s.exercise_type = rec.at("exercise_type").get<std::string>();
        if (rec.contains("assessment")) {
            std::string a = rec["assessment"].get<std::string>();
            if (a == "+") s.assessment = Assessment::correct;
            else if (a == "-" || a == "−") s.assessment = Assessment::incorrect;
            else
                throw ParseError("invalid assessment '" + a + "' in " + manifest_path.string() +
                                 " at line " + std::to_string(line_no));
        } else if (rec.contains("clinical_score")) {
            s.clinical_score = rec["clinical_score"].get<double>();
        } else {
            throw ParseError("record lacks assessment and clinical_score in " + manifest_path.string() +
                             " at line " + std::to_string(line_no));
        }
        s.subject_id = rec.value("subject_id", "");
        const fs::path frames_file = root / rec.at("frames_file").get<std::string>();
        auto rows = read_frame_matrix(frames_file, ds.graph.joint_count * channels);
        const long t_count = static_cast<long>(rows.size());
        if (rec.contains("frame_count") && rec["frame_count"].get<long>() != t_count)
            throw IngestError("frame_count mismatch for sample '" + s.id + "' in " + frames_file.string());
        s.sequence.frames = Tensor({t_count, static_cast<long>(ds.graph.joint_count), channels});
        for (long t = 0; t < t_count; ++t)
            for (long j = 0; j < ds.graph.joint_count; ++j)
                for (long c = 0; c < channels; ++c)
                    s.sequence.frames(t, j, c) = rows[static_cast<size_t>(t)][static_cast<size_t>(j * channels + c)];
        s.sequence.fps = fps;
        ds.samples.push_back(std::move(s));
    }
    ds.validate();
    return ds;
}

Dataset ingest(DatasetKind kind, const fs::path& root, const IngestOptions& options, Warnings* warnings) {
    if (!fs::exists(root)) throw IngestError("dataset root does not exist: " + root.string());
    Dataset ds;
    switch (kind) {
        case DatasetKind::uiprmd: ds = ingest_uiprmd(root, options); break;
        case DatasetKind::irds: ds = ingest_irds(root, options); break;
        case DatasetKind::kimore: ds = ingest_kimore(root, options); break;
        case DatasetKind::canonical: ds = ingest_canonical(root); break;
    }
    ds.validate();
    if (warnings) {
        std::map<std::string, long> per_type;
        for (const auto& s : ds.samples) per_type[s.exercise_type] += 1;
        for (const auto& [type, n] : per_type)
            if (n < 4) warn(warnings, "exercise type " + type + " has only " + std::to_string(n) + " samples");
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Splits

SplitScheme parse_split_scheme(const std::string& s) {
    if (s == "ratio_3_1") return SplitScheme::ratio_3_1;
    if (s == "kfold_5") return SplitScheme::kfold_5;
    throw ArgumentError("unknown split scheme: '" + s + "' (expected ratio_3_1 or kfold_5)");
}

const char* to_string(SplitScheme s) {
    return s == SplitScheme::ratio_3_1 ? "ratio_3_1" : "kfold_5";
}

namespace {

struct Stratum {
    std::string key;
    std::vector<size_t> members;  // indices into dataset.samples
};

std::vector<Stratum> build_strata(const Dataset& dataset) {
    std::map<std::string, std::vector<size_t>> by_key;
    for (size_t i = 0; i < dataset.samples.size(); ++i) {
        const auto& s = dataset.samples[i];
        std::string cls = s.assessment ? (s.assessment == Assessment::correct ? "+" : "-") : "score";
        by_key[s.exercise_type + "\x1f" + cls].push_back(i);
    }
    std::vector<Stratum> strata;
    for (auto& [key, members] : by_key) {
        // Stable base order independent of ingestion order.
        std::sort(members.begin(), members.end(), [&](size_t a, size_t b) {
            return dataset.samples[a].id < dataset.samples[b].id;
        });
        strata.push_back({key, std::move(members)});
    }
    return strata;
}

Dataset subset(const Dataset& dataset, const std::vector<size_t>& indices) {
    Dataset out;
    out.graph = dataset.graph;
    out.name = dataset.name;
    out.samples.reserve(indices.size());
    for (size_t i : indices) out.samples.push_back(dataset.samples[i]);
    return out;
}

// Groups stratum members by subject so a subject never straddles a boundary.
std::vector<std::vector<size_t>> subject_groups(const Dataset& dataset, const std::vector<size_t>& members) {
    std::map<std::string, std::vector<size_t>> by_subject;
    for (size_t i : members) by_subject[dataset.samples[i].subject_id].push_back(i);
    std::vector<std::vector<size_t>> groups;
    for (auto& [subject, idx] : by_subject) groups.push_back(std::move(idx));
    return groups;
}

}  // namespace

std::vector<SplitPair> split(const Dataset& dataset, SplitScheme scheme, std::uint64_t seed,
                             const SplitOptions& options, Warnings* warnings) {
    if (dataset.samples.empty()) throw ArgumentError("split: dataset is empty");
    Rng rng(seed);

    const int fold_count = scheme == SplitScheme::kfold_5 ? 5 : 1;
    // validation[f] collects the indices of validation fold f.
    std::vector<std::vector<size_t>> validation(static_cast<size_t>(fold_count));

    if (options.subject_aware) {
        // Whole subjects move together; stratification becomes approximate.
        std::vector<size_t> all(dataset.samples.size());
        std::iota(all.begin(), all.end(), 0);
        std::sort(all.begin(), all.end(), [&](size_t a, size_t b) {
            return dataset.samples[a].id < dataset.samples[b].id;
        });
        auto groups = subject_groups(dataset, all);
        std::shuffle(groups.begin(), groups.end(), rng);
        if (scheme == SplitScheme::ratio_3_1) {
            size_t val_quota = (dataset.samples.size() + 2) / 4;
            size_t taken = 0;
            for (const auto& group : groups) {
                if (taken >= val_quota) break;
                for (size_t i : group) validation[0].push_back(i);
                taken += group.size();
            }
        } else {
            if (groups.size() < 5)
                warn(warnings, "fewer subjects than folds; some folds share no subject");
            size_t fold = 0;
            for (const auto& group : groups) {
                for (size_t i : group) validation[fold % 5].push_back(i);
                ++fold;
            }
        }
    } else {
        auto strata = build_strata(dataset);
        for (auto& stratum : strata) {
            std::vector<size_t> members = stratum.members;
            std::shuffle(members.begin(), members.end(), rng);

            if (scheme == SplitScheme::ratio_3_1) {
                size_t val_quota = (members.size() + 2) / 4;  // nearest to n/4, ties up
                for (size_t k = 0; k < val_quota; ++k) validation[0].push_back(members[k]);
            } else {
                if (members.size() < 5)
                    warn(warnings, "stratum '" + stratum.key + "' has fewer samples than folds (" +
                                       std::to_string(members.size()) +
                                       "); assigned without stratification");
                for (size_t k = 0; k < members.size(); ++k)
                    validation[k % 5].push_back(members[k]);
            }
        }
    }

    std::vector<SplitPair> pairs;
    for (int f = 0; f < fold_count; ++f) {
        std::vector<char> in_val(dataset.samples.size(), 0);
        for (size_t i : validation[static_cast<size_t>(f)]) in_val[i] = 1;
        std::vector<size_t> train_idx, val_idx;
        for (size_t i = 0; i < dataset.samples.size(); ++i)
            (in_val[i] ? val_idx : train_idx).push_back(i);
        pairs.push_back({subset(dataset, train_idx), subset(dataset, val_idx)});
    }
    return pairs;
}

}  // namespace rehabcl
