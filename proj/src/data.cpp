#include "vcmr/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "vcmr/container.hpp"
#include "vcmr/error.hpp"

namespace fs = std::filesystem;

namespace vcmr {

const VideoRecord* Corpus::find(const std::string& id) const {
    for (const VideoRecord& v : videos)
        if (v.id == id) return &v;
    return nullptr;
}

const VideoRecord& Corpus::require(const std::string& id) const {
    const VideoRecord* v = find(id);
    if (!v) throw InvalidArgument("unknown video id: " + id);
    return *v;
}

Matrix assign_subtitles(const std::vector<SubtitleSpan>& spans, double clip_len, int n_clips,
                        int dim) {
    for (const SubtitleSpan& s : spans) {
        if (!(s.t_begin < s.t_end))
            throw InvalidArgument("subtitle span must have t_begin < t_end");
        if (static_cast<int>(s.feature.size()) != dim)
            throw ShapeError("subtitle feature dim mismatch");
    }
    Matrix out(n_clips, dim);
    for (int i = 0; i < n_clips; ++i) {
        const double c0 = i * clip_len;
        const double c1 = (i + 1) * clip_len;
        int count = 0;
        for (const SubtitleSpan& s : spans) {
            if (s.t_end <= c0 || s.t_begin >= c1) continue;  // no overlap
            ++count;
            for (int j = 0; j < dim; ++j) out.at(i, j) += s.feature[static_cast<size_t>(j)];
        }
        if (count > 1)
            for (int j = 0; j < dim; ++j) out.at(i, j) /= count;
    }
    return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

Matrix matrix_from_record(const NamedTensor& t, const std::string& path) {
    if (t.shape.size() != 2) throw IoError(path + ": record \"" + t.name + "\" is not a matrix");
    Matrix m(t.shape[0], t.shape[1]);
    m.data = t.data;
    return m;
}

std::string resolve(const std::string& base_dir, const std::string& rel) {
    fs::path p(rel);
    if (p.is_absolute()) return rel;
    return (fs::path(base_dir) / p).string();
}

}  // namespace

Corpus load_corpus(const std::string& manifest_path, double clip_len, int max_clips,
                   int dim_visual, int dim_textual) {
    std::ifstream is(manifest_path);
    if (!is) throw IoError(manifest_path + ": cannot open manifest");
    const std::string base = fs::path(manifest_path).parent_path().string();

    Corpus corpus;
    corpus.clip_len = clip_len;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto cols = split_tabs(line);
        if (cols.size() != 5)
            throw IoError(manifest_path + ":" + std::to_string(line_no) +
                          ": expected 5 tab-separated columns");
        VideoRecord rec;
        rec.id = cols[0];
        rec.duration = std::stod(cols[1]);
        const int expected_clips = static_cast<int>(std::ceil(rec.duration / clip_len));

        const std::string vis_path = resolve(base, cols[2]);
        auto vis_file = read_container(vis_path);
        rec.visual = matrix_from_record(find_tensor(vis_file, "visual", vis_path), vis_path);
        if (rec.visual.cols != dim_visual)
            throw IoError(vis_path + ": visual dim mismatch, expected " +
                          std::to_string(dim_visual) + ", got " + std::to_string(rec.visual.cols));
        if (rec.visual.rows != expected_clips)
            throw IoError(vis_path + ": clip count mismatch, manifest implies " +
                          std::to_string(expected_clips) + ", file has " +
                          std::to_string(rec.visual.rows));
        rec.n_clips = rec.visual.rows;

        if (cols[3] != "-") {
            const std::string txt_path = resolve(base, cols[3]);
            auto txt_file = read_container(txt_path);
            rec.textual = matrix_from_record(find_tensor(txt_file, "textual", txt_path), txt_path);
            if (rec.textual.cols != dim_textual)
                throw IoError(txt_path + ": textual dim mismatch, expected " +
                              std::to_string(dim_textual) + ", got " +
                              std::to_string(rec.textual.cols));
            if (rec.textual.rows != rec.n_clips)
                throw IoError(txt_path + ": textual clip count mismatch");
        } else if (cols[4] != "-") {
            const std::string sub_path = resolve(base, cols[4]);
            auto sub_file = read_container(sub_path);
            const NamedTensor& times = find_tensor(sub_file, "sub_times", sub_path);
            const NamedTensor& feats = find_tensor(sub_file, "sub_features", sub_path);
            if (times.shape.size() != 2 || times.shape[1] != 2)
                throw IoError(sub_path + ": sub_times must be S x 2");
            if (feats.shape.size() != 2 || feats.shape[0] != times.shape[0])
                throw IoError(sub_path + ": sub_features row count mismatch");
            if (feats.shape[1] != dim_textual)
                throw IoError(sub_path + ": subtitle feature dim mismatch, expected " +
                              std::to_string(dim_textual) + ", got " +
                              std::to_string(feats.shape[1]));
            std::vector<SubtitleSpan> spans;
            for (int s = 0; s < times.shape[0]; ++s) {
                SubtitleSpan sp;
                sp.t_begin = times.data[static_cast<size_t>(s) * 2];
                sp.t_end = times.data[static_cast<size_t>(s) * 2 + 1];
                sp.feature.assign(feats.data.begin() + static_cast<int64_t>(s) * dim_textual,
                                  feats.data.begin() + static_cast<int64_t>(s + 1) * dim_textual);
                spans.push_back(std::move(sp));
            }
            rec.textual = assign_subtitles(spans, clip_len, rec.n_clips, dim_textual);
        } else {
            rec.textual = Matrix(rec.n_clips, dim_textual);
        }

        if (rec.n_clips > max_clips) {
            std::cerr << "warning: video " << rec.id << " has " << rec.n_clips
                      << " clips, truncating to " << max_clips << "\n";
            rec.n_clips = max_clips;
            rec.visual.data.resize(static_cast<size_t>(max_clips) * rec.visual.cols);
            rec.visual.rows = max_clips;
            rec.textual.data.resize(static_cast<size_t>(max_clips) * rec.textual.cols);
            rec.textual.rows = max_clips;
        }
        corpus.videos.push_back(std::move(rec));
    }
    return corpus;
}

std::vector<QueryRecord> load_queries(const std::string& path, int dim_textual) {
    std::ifstream is(path);
    if (!is) throw IoError(path + ": cannot open queries file");
    const std::string base = fs::path(path).parent_path().string();
    std::vector<QueryRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto cols = split_tabs(line);
        if (cols.size() != 5 && cols.size() != 6)
            throw IoError(path + ":" + std::to_string(line_no) +
                          ": expected 5 or 6 tab-separated columns");
        QueryRecord q;
        q.id = cols[0];
        q.video_id = cols[1];
        q.begin_s = std::stod(cols[2]);
        q.end_s = std::stod(cols[3]);
        const std::string feat_path = resolve(base, cols[4]);
        auto file = read_container(feat_path);
        q.tokens = matrix_from_record(find_tensor(file, "tokens", feat_path), feat_path);
        if (q.tokens.cols != dim_textual)
            throw IoError(feat_path + ": token dim mismatch, expected " +
                          std::to_string(dim_textual) + ", got " + std::to_string(q.tokens.cols));
        if (cols.size() == 6) q.tag = cols[5];
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<RankList> load_rank_lists(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError(path + ": cannot open rank list file");
    std::vector<RankList> out;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto cols = split_tabs(line);
        if (cols.size() != 3)
            throw IoError(path + ":" + std::to_string(line_no) + ": expected 3 columns");
        const double score = std::stod(cols[2]);
        if (out.empty() || out.back().query_id != cols[0]) {
            out.push_back({cols[0], {}});
        }
        RankList& rl = out.back();
        if (!rl.entries.empty() && rl.entries.back().second < score)
            throw IoError(path + ":" + std::to_string(line_no) +
                          ": rank list scores must be non-increasing");
        for (const auto& [vid, s] : rl.entries)
            if (vid == cols[1])
                throw IoError(path + ":" + std::to_string(line_no) + ": duplicate video in list");
        rl.entries.emplace_back(cols[1], score);
    }
    return out;
}

void write_rank_lists(const std::string& path, const std::vector<RankList>& lists) {
    std::ofstream os(path);
    if (!os) throw IoError(path + ": cannot open for writing");
    os.precision(17);
    for (const RankList& rl : lists)
        for (const auto& [vid, score] : rl.entries)
            os << rl.query_id << '\t' << vid << '\t' << score << '\n';
}

void write_queries(const std::string& path, const std::vector<QueryRecord>& queries,
                   const std::string& feature_dir_rel, const std::string& base_dir) {
    std::ofstream os(path);
    if (!os) throw IoError(path + ": cannot open for writing");
    os.precision(17);
    for (const QueryRecord& q : queries) {
        const std::string rel = feature_dir_rel + "/" + q.id + ".bin";
        write_container((fs::path(base_dir) / rel).string(),
                        {{"tokens", {q.tokens.rows, q.tokens.cols}, q.tokens.data}});
        os << q.id << '\t' << q.video_id << '\t' << q.begin_s << '\t' << q.end_s << '\t' << rel;
        if (!q.tag.empty()) os << '\t' << q.tag;
        os << '\n';
    }
}

// ---- synthetic --------------------------------------------------------------

void SyntheticSpec::validate() const {
    if (videos < 2) throw ConfigError("synth: need at least 2 videos");
    if (clips_min < 1 || clips_max < clips_min) throw ConfigError("synth: bad clip range");
    if (queries_per_video < 1) throw ConfigError("synth: queries_per_video must be >= 1");
    if (span_min < 1 || span_max < span_min) throw ConfigError("synth: bad span range");
    if (span_min > clips_min)
        throw ConfigError("synth: span_min exceeds the shortest possible video");
    if (beta < 0.0 || beta > 1.0) throw ConfigError("synth: beta must be in [0,1]");
    if (beta_alt >= 0.0 && (beta_alt > 1.0 || beta_alt_fraction < 0.0 || beta_alt_fraction > 1.0))
        throw ConfigError("synth: bad beta_alt settings");
    if (tokens_min < 1 || tokens_max < tokens_min) throw ConfigError("synth: bad token range");
    if (dim_latent < 2) throw ConfigError("synth: dim_latent must be >= 2");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("synth: val_fraction must be in [0,1)");
    if (rank_top < 1) throw ConfigError("synth: rank_top must be >= 1");
}

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double sigma = 1.0) {
    std::normal_distribution<double> dist(0.0, sigma);
    Matrix m(rows, cols);
    for (double& v : m.data) v = dist(rng);
    return m;
}

std::vector<double> project(const Matrix& p, const std::vector<double>& z) {
    std::vector<double> out(static_cast<size_t>(p.rows), 0.0);
    for (int i = 0; i < p.rows; ++i)
        for (int j = 0; j < p.cols; ++j)
            out[static_cast<size_t>(i)] += p.at(i, j) * z[static_cast<size_t>(j)];
    return out;
}

}  // namespace

RankList plant_rank_list(const std::vector<std::string>& video_ids, const std::string& query_id,
                         const std::string& gt_video, int target_rank, double noise,
                         std::mt19937_64& rng) {
    const int n = static_cast<int>(video_ids.size());
    int p = target_rank;
    if (noise > 0.0) {
        std::normal_distribution<double> jitter(0.0, noise);
        p += static_cast<int>(std::lround(jitter(rng)));
    }
    p = std::clamp(p, 1, n);

    std::vector<std::string> others;
    for (const std::string& v : video_ids)
        if (v != gt_video) others.push_back(v);
    std::shuffle(others.begin(), others.end(), rng);

    RankList rl;
    rl.query_id = query_id;
    int oi = 0;
    for (int rank = 1; rank <= n; ++rank) {
        const std::string& vid = rank == p ? gt_video : others[static_cast<size_t>(oi++)];
        rl.entries.emplace_back(vid, 1.0 - static_cast<double>(rank - 1) / n);
    }
    return rl;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Fixed cross-modal maps from the latent concept space. Visual-leaning
    // queries draw concepts from the first half of the latent dims, textual
    // from the second half, so query type is linearly recoverable. Query
    // tokens share the textual map: queries and descriptions come from the
    // same text extractor.
    const Matrix p_vis = random_matrix(spec.dim_visual, spec.dim_latent, rng);
    const Matrix p_txt = random_matrix(spec.dim_textual, spec.dim_latent, rng);
    const Matrix& p_query = p_txt;

    SyntheticData data;
    data.corpus.clip_len = spec.clip_len;

    std::uniform_int_distribution<int> clip_count(spec.clips_min, spec.clips_max);
    for (int v = 0; v < spec.videos; ++v) {
        VideoRecord rec;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "v%04d", v);
        rec.id = buf;
        rec.n_clips = clip_count(rng);
        rec.duration = rec.n_clips * spec.clip_len;
        rec.visual = random_matrix(rec.n_clips, spec.dim_visual, rng);
        rec.textual = random_matrix(rec.n_clips, spec.dim_textual, rng);
        data.corpus.videos.push_back(std::move(rec));
    }

    std::vector<std::string> video_ids;
    for (const VideoRecord& v : data.corpus.videos) video_ids.push_back(v.id);

    // Mixed-population corpora split the latent space so query type stays
    // linearly recoverable from the tokens; single-population corpora use
    // the full space.
    const bool mixed = spec.beta_alt >= 0.0 && spec.beta_alt_fraction > 0.0;
    const int half = spec.dim_latent / 2;
    std::uniform_int_distribution<int> token_count(spec.tokens_min, spec.tokens_max);
    std::uniform_int_distribution<int> rank_dist(1, std::min(spec.rank_top, spec.videos));

    int qid = 0;
    const int n_val_per_video =
        static_cast<int>(std::floor(spec.queries_per_video * spec.val_fraction + 0.5));
    for (VideoRecord& rec : data.corpus.videos) {
        for (int k = 0; k < spec.queries_per_video; ++k) {
            double beta_q = spec.beta;
            if (spec.beta_alt >= 0.0 && unit(rng) < spec.beta_alt_fraction) beta_q = spec.beta_alt;
            const bool visual_leaning = beta_q >= 0.5;

            // unit concept; in the type's latent half-space when mixed
            std::vector<double> z(static_cast<size_t>(spec.dim_latent), 0.0);
            const int lo = mixed && !visual_leaning ? half : 0;
            const int hi = mixed && visual_leaning ? half : spec.dim_latent;
            double norm = 0.0;
            for (int d = lo; d < hi; ++d) {
                z[static_cast<size_t>(d)] = gauss(rng);
                norm += z[static_cast<size_t>(d)] * z[static_cast<size_t>(d)];
            }
            norm = std::sqrt(norm);
            if (norm < 1e-9) {
                z[static_cast<size_t>(lo)] = 1.0;
                norm = 1.0;
            }
            for (double& zv : z) zv /= norm;

            std::uniform_int_distribution<int> span_len_dist(spec.span_min,
                                                             std::min(spec.span_max, rec.n_clips));
            const int span_len = span_len_dist(rng);
            std::uniform_int_distribution<int> begin_dist(0, rec.n_clips - span_len);
            const int b = begin_dist(rng);
            const int e = b + span_len - 1;

            const auto sig_v = project(p_vis, z);
            const auto sig_t = project(p_txt, z);
            for (int i = b; i <= e; ++i) {
                for (int j = 0; j < spec.dim_visual; ++j)
                    rec.visual.at(i, j) += spec.snr * beta_q * sig_v[static_cast<size_t>(j)];
                for (int j = 0; j < spec.dim_textual; ++j)
                    rec.textual.at(i, j) += spec.snr * (1.0 - beta_q) * sig_t[static_cast<size_t>(j)];
            }

            QueryRecord q;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "q%05d", qid++);
            q.id = buf;
            q.video_id = rec.id;
            q.begin_s = b * spec.clip_len;
            q.end_s = (e + 1) * spec.clip_len;
            q.tag = visual_leaning ? "visual" : "textual";
            const int m = token_count(rng);
            q.tokens = Matrix(m, spec.dim_textual);
            const auto sig_q = project(p_query, z);
            for (int t = 0; t < m; ++t)
                for (int j = 0; j < spec.dim_textual; ++j)
                    q.tokens.at(t, j) = sig_q[static_cast<size_t>(j)] + spec.token_noise * gauss(rng);

            const bool is_val = k >= spec.queries_per_video - n_val_per_video;
            (is_val ? data.val_queries : data.train_queries).push_back(std::move(q));
        }
    }

    for (const auto* bucket : {&data.train_queries, &data.val_queries})
        for (const QueryRecord& q : *bucket)
            data.rank_lists.push_back(
                plant_rank_list(video_ids, q.id, q.video_id, rank_dist(rng), spec.rank_noise, rng));

    return data;
}

void write_synthetic(const SyntheticData& data, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "features");
    std::ofstream manifest(fs::path(dir) / "corpus.tsv");
    if (!manifest) throw IoError(dir + "/corpus.tsv: cannot open for writing");
    manifest.precision(17);
    for (const VideoRecord& v : data.corpus.videos) {
        const std::string rel = "features/" + v.id + ".bin";
        write_container((fs::path(dir) / rel).string(),
                        {{"visual", {v.visual.rows, v.visual.cols}, v.visual.data},
                         {"textual", {v.textual.rows, v.textual.cols}, v.textual.data}});
        manifest << v.id << '\t' << v.duration << '\t' << rel << '\t' << rel << '\t' << "-"
                 << '\n';
    }
    write_queries((fs::path(dir) / "queries_train.tsv").string(), data.train_queries, "features",
                  dir);
    write_queries((fs::path(dir) / "queries_val.tsv").string(), data.val_queries, "features", dir);
    write_rank_lists((fs::path(dir) / "ranks.tsv").string(), data.rank_lists);
}

}  // namespace vcmr
