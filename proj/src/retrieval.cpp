#include "vcmr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace vcmr {

std::vector<MomentCandidate> generate_candidates(std::span<const double> raw_begin,
                                                 std::span<const double> raw_end,
                                                 const LengthBounds& bounds) {
    bounds.validate();
    const int n = static_cast<int>(raw_begin.size());
    if (static_cast<int>(raw_end.size()) != n)
        throw ShapeError("generate_candidates: begin/end lengths differ");
    if (n < bounds.l_min)
        throw InvalidArgument("generate_candidates: video shorter than l_min");

    auto softmax_vec = [](std::span<const double> x) {
        double mx = *std::max_element(x.begin(), x.end());
        std::vector<double> out(x.size());
        double sum = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            out[i] = std::exp(x[i] - mx);
            sum += out[i];
        }
        for (double& v : out) v /= sum;
        return out;
    };
    const std::vector<double> bhat = softmax_vec(raw_begin);
    const std::vector<double> ehat = softmax_vec(raw_end);

    std::vector<MomentCandidate> out;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const int len = j - i + 1;
            if (len < bounds.l_min || len > bounds.l_max) continue;
            MomentCandidate c;
            c.b = i;
            c.e = j;
            c.bhat = bhat[static_cast<size_t>(i)];
            c.ehat = ehat[static_cast<size_t>(j)];
            c.raw_b = raw_begin[static_cast<size_t>(i)];
            c.raw_e = raw_end[static_cast<size_t>(j)];
            c.prob = c.bhat * c.ehat;
            out.push_back(c);
        }
    return out;
}

double clip_span_iou(int b1, int e1, int b2, int e2) {
    const int inter = std::min(e1, e2) - std::max(b1, b2) + 1;
    if (inter <= 0) return 0.0;
    const int uni = (e1 - b1 + 1) + (e2 - b2 + 1) - inter;
    return static_cast<double>(inter) / uni;
}

std::vector<MomentCandidate> nms(std::vector<MomentCandidate> candidates, double iou_threshold,
                                 int keep_n) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const MomentCandidate& a, const MomentCandidate& b) {
                         if (a.prob != b.prob) return a.prob > b.prob;
                         if (a.b != b.b) return a.b < b.b;
                         return a.e < b.e;
                     });
    std::vector<MomentCandidate> kept;
    for (const MomentCandidate& c : candidates) {
        if (static_cast<int>(kept.size()) >= keep_n) break;
        bool suppressed = false;
        for (const MomentCandidate& k : kept) {
            if (clip_span_iou(c.b, c.e, k.b, k.e) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(c);
    }
    return kept;
}

std::vector<ScoredMoment> score_moments(std::vector<ScoredMoment> moments, Scoring mode) {
    for (ScoredMoment& m : moments) {
        switch (mode) {
            case Scoring::general:
                m.score = m.bhat * m.ehat * m.r1;
                break;
            case Scoring::exclusive:
                m.score = m.bhat * m.ehat * m.r2;
                break;
            case Scoring::disjoint:
                m.score = m.raw_b + m.raw_e;
                break;
        }
    }
    std::stable_sort(moments.begin(), moments.end(),
                     [](const ScoredMoment& a, const ScoredMoment& b) {
                         if (a.score != b.score) return a.score > b.score;
                         if (a.video_id != b.video_id) return a.video_id < b.video_id;
                         if (a.b != b.b) return a.b < b.b;
                         return a.e < b.e;
                     });
    return moments;
}

const ContextualizedVideo& CorpusEncoding::require(const std::string& id) const {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw InvalidArgument("corpus encoding missing video " + id);
    return it->second;
}

CorpusEncoding encode_corpus(const Model& model, const Corpus& corpus) {
    NoGradGuard ng;
    CorpusEncoding enc;
    for (const VideoRecord& rec : corpus.videos)
        enc.by_id.emplace(rec.id, model.encode(rec.visual, rec.textual));
    return enc;
}

std::vector<ScoredMoment> vcmr_search(const Model& model, const Corpus& corpus,
                                      const QueryRecord& query, const RankList& rank_list,
                                      const RetrievalOptions& opts, const CorpusEncoding* cache) {
    NoGradGuard ng;
    int k = opts.top_k;
    if (k > static_cast<int>(rank_list.entries.size())) {
        std::cerr << "warning: top_k " << k << " exceeds rank list size "
                  << rank_list.entries.size() << ", clamping\n";
        k = static_cast<int>(rank_list.entries.size());
    }
    if (opts.scoring == Scoring::exclusive && !model.config().vs_head)
        throw InvalidArgument("exclusive scoring requires the VS head");

    QueryContext qc = model.make_query_context(query.tokens);

    std::vector<ScoredMoment> all;
    for (int rank = 0; rank < k; ++rank) {
        const auto& [vid, r1] = rank_list.entries[static_cast<size_t>(rank)];
        const VideoRecord& rec = corpus.require(vid);
        ContextualizedVideo enc =
            cache ? cache->require(vid) : model.encode(rec.visual, rec.textual);
        Model::VideoOutput out = model.forward_video(enc, qc);

        std::span<const double> raw_b(out.scores.begin.values().data(),
                                      static_cast<size_t>(rec.n_clips));
        std::span<const double> raw_e(out.scores.end.values().data(),
                                      static_cast<size_t>(rec.n_clips));
        auto cands = nms(generate_candidates(raw_b, raw_e, opts.bounds), opts.nms_iou,
                         opts.keep_n);
        const double r2 = out.video_score.defined() ? out.video_score.item() : 0.0;
        for (const MomentCandidate& c : cands) {
            ScoredMoment m;
            m.video_id = vid;
            m.b = c.b;
            m.e = c.e;
            m.t0 = c.b * corpus.clip_len;
            m.t1 = (c.e + 1) * corpus.clip_len;
            m.bhat = c.bhat;
            m.ehat = c.ehat;
            m.raw_b = c.raw_b;
            m.raw_e = c.raw_e;
            m.r1 = r1;
            m.r2 = r2;
            all.push_back(std::move(m));
        }
    }
    return score_moments(std::move(all), opts.scoring);
}

RankList stage1_rank_simplified(const Model& model, const Corpus& corpus,
                                const QueryRecord& query) {
    NoGradGuard ng;
    QueryContext qc = model.make_query_context(query.tokens);
    RankList rl;
    rl.query_id = query.id;
    for (const VideoRecord& rec : corpus.videos) {
        ContextualizedVideo enc = model.encode(rec.visual, rec.textual);
        rl.entries.emplace_back(rec.id, model.stage1_similarity(enc, qc));
    }
    std::stable_sort(rl.entries.begin(), rl.entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return rl;
}

}  // namespace vcmr
