#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vcmr/types.hpp"

namespace vcmr {

// Per-video clip-level features plus metadata. textual rows are zero when a
// video has no descriptions.
struct VideoRecord {
    std::string id;
    double duration = 0.0;
    int n_clips = 0;
    Matrix visual;   // n_clips x D_v
    Matrix textual;  // n_clips x D_t
};

struct QueryRecord {
    std::string id;
    std::string video_id;  // ground truth
    double begin_s = 0.0;
    double end_s = 0.0;
    Matrix tokens;  // m x D_t
    std::string tag;  // free-form (synthetic generator marks visual/textual)
};

struct Corpus {
    double clip_len = 1.5;
    std::vector<VideoRecord> videos;

    const VideoRecord* find(const std::string& id) const;
    const VideoRecord& require(const std::string& id) const;
};

struct SubtitleSpan {
    double t_begin = 0.0;
    double t_end = 0.0;
    std::vector<double> feature;  // D_t
};

// Clip i's textual feature is the mean of all span features overlapping
// [i*clip_len, (i+1)*clip_len); zero vector when none overlap.
Matrix assign_subtitles(const std::vector<SubtitleSpan>& spans, double clip_len, int n_clips,
                        int dim);

// Manifest rows: video_id <tab> duration_s <tab> visual_path <tab>
// textual_path|- <tab> subtitle_path|-; paths relative to the manifest.
Corpus load_corpus(const std::string& manifest_path, double clip_len, int max_clips,
                   int dim_visual, int dim_textual);

// Query rows: query_id <tab> video_id <tab> begin_s <tab> end_s <tab>
// feature_path [<tab> tag].
std::vector<QueryRecord> load_queries(const std::string& path, int dim_textual);

// Rank rows: query_id <tab> video_id <tab> score, grouped per query with
// non-increasing scores.
std::vector<RankList> load_rank_lists(const std::string& path);
void write_rank_lists(const std::string& path, const std::vector<RankList>& lists);

// ---- synthetic corpus ------------------------------------------------------

struct SyntheticSpec {
    int videos = 50;
    int clips_min = 12;
    int clips_max = 20;
    int queries_per_video = 4;
    double snr = 2.0;
    double beta = 0.8;               // visual share of the planted signal
    double beta_alt = -1.0;          // optional second query population (<0 disables)
    double beta_alt_fraction = 0.0;  // fraction of queries drawn at beta_alt
    int dim_visual = 32;
    int dim_textual = 24;
    int dim_latent = 8;
    int tokens_min = 6;
    int tokens_max = 10;
    double token_noise = 0.5;
    int span_min = 2;  // clips
    int span_max = 5;
    double clip_len = 1.5;
    double val_fraction = 0.25;  // held-out queries per video
    int rank_top = 10;           // oracle plants gt uniformly within this depth
    double rank_noise = 0.0;
    std::uint64_t seed = 42;

    void validate() const;
};

struct SyntheticData {
    Corpus corpus;
    std::vector<QueryRecord> train_queries;
    std::vector<QueryRecord> val_queries;
    std::vector<RankList> rank_lists;  // covers train + val
};

// Background clips are isotropic noise; each query plants a latent concept
// into its ground-truth span, split across modalities by beta. Deterministic
// in the seed.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Materializes a generated corpus as manifest + feature containers +
// query/rank tables so load_corpus / load_queries round-trip it.
void write_synthetic(const SyntheticData& data, const std::string& dir);

void write_queries(const std::string& path, const std::vector<QueryRecord>& queries,
                   const std::string& feature_dir_rel, const std::string& base_dir);

// Oracle first-stage list: plants the ground-truth video at target_rank
// (jittered by noise), other videos shuffled, scores strictly decreasing.
RankList plant_rank_list(const std::vector<std::string>& video_ids, const std::string& query_id,
                         const std::string& gt_video, int target_rank, double noise,
                         std::mt19937_64& rng);

}  // namespace vcmr
