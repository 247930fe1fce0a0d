#pragma once

#include <span>
#include <unordered_map>

#include "vcmr/data.hpp"
#include "vcmr/model.hpp"

namespace vcmr {

struct LengthBounds {
    int l_min = 1;
    int l_max = 24;

    void validate() const {
        if (l_min < 1 || l_max < l_min) throw ConfigError("bounds: need 1 <= l_min <= l_max");
    }
};

// Clip-span candidate [b, e] with within-video normalized begin/end
// probabilities and the raw scores they came from.
struct MomentCandidate {
    int b = 0;
    int e = 0;
    double bhat = 0.0;
    double ehat = 0.0;
    double raw_b = 0.0;
    double raw_e = 0.0;
    double prob = 0.0;  // bhat * ehat
};

// Softmax of the raw begin/end scores over the video's real clips, then the
// outer-product candidate set filtered by the length bounds.
std::vector<MomentCandidate> generate_candidates(std::span<const double> raw_begin,
                                                 std::span<const double> raw_end,
                                                 const LengthBounds& bounds);

// IoU of two inclusive clip spans.
double clip_span_iou(int b1, int e1, int b2, int e2);

// Greedy suppression: keep the highest-probability candidate, drop the rest
// with IoU strictly above the threshold, repeat; stop after keep_n survivors.
std::vector<MomentCandidate> nms(std::vector<MomentCandidate> candidates, double iou_threshold,
                                 int keep_n);

struct ScoredMoment {
    std::string video_id;
    int b = 0;
    int e = 0;
    double t0 = 0.0;
    double t1 = 0.0;
    double bhat = 0.0;
    double ehat = 0.0;
    double raw_b = 0.0;
    double raw_e = 0.0;
    double r1 = 0.0;  // first-stage video score
    double r2 = 0.0;  // VS head score (exclusive mode)
    double score = 0.0;
};

// Applies the mode's similarity measure and sorts descending; ties broken by
// (video id, begin, end) ascending.
std::vector<ScoredMoment> score_moments(std::vector<ScoredMoment> moments, Scoring mode);

struct RetrievalOptions {
    int top_k = 10;
    Scoring scoring = Scoring::general;
    double nms_iou = 0.7;
    int keep_n = 100;
    LengthBounds bounds;
};

// Query-independent encoder outputs, reusable across queries while the
// parameters are fixed (built without gradient recording).
struct CorpusEncoding {
    std::unordered_map<std::string, ContextualizedVideo> by_id;
    const ContextualizedVideo& require(const std::string& id) const;
};
CorpusEncoding encode_corpus(const Model& model, const Corpus& corpus);

// Full stage-2 pipeline over the top-k first-stage videos; per-video NMS,
// then global ranking. `cache` skips re-encoding when given.
std::vector<ScoredMoment> vcmr_search(const Model& model, const Corpus& corpus,
                                      const QueryRecord& query, const RankList& rank_list,
                                      const RetrievalOptions& opts,
                                      const CorpusEncoding* cache = nullptr);

// Simplified first-stage retriever (QDF encoders + pooled query vectors +
// cosine similarity, fusion-weighted).
RankList stage1_rank_simplified(const Model& model, const Corpus& corpus,
                                const QueryRecord& query);

}  // namespace vcmr
