#include "vcmr/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <unordered_map>

#include "vcmr/evaluation.hpp"

namespace vcmr {

std::pair<int, int> align_ground_truth(double begin_s, double end_s, double clip_len,
                                       int n_clips) {
    if (!(begin_s >= 0.0) || !(begin_s < end_s))
        throw InvalidArgument("align_ground_truth: need 0 <= begin < end");
    if (begin_s >= n_clips * clip_len)
        throw InvalidArgument("align_ground_truth: span outside video");
    int b = static_cast<int>(std::floor(begin_s / clip_len));
    int e = static_cast<int>(std::ceil(end_s / clip_len)) - 1;
    b = std::min(b, n_clips - 1);
    e = std::clamp(e, b, n_clips - 1);
    return {b, e};
}

Tensor shared_softmax_loss(const std::vector<const MomentScores*>& videos, int b_gt, int e_gt) {
    if (videos.empty()) throw InvalidArgument("shared_softmax_loss: empty batch");
    const MomentScores& pos = *videos.front();
    if (b_gt < 0 || e_gt < b_gt || e_gt >= static_cast<int>(pos.clip_mask.size()))
        throw InvalidArgument("shared_softmax_loss: gt span out of range");
    if (!pos.clip_mask[static_cast<size_t>(b_gt)] || !pos.clip_mask[static_cast<size_t>(e_gt)])
        throw InvalidArgument("shared_softmax_loss: gt index masked");

    std::vector<Tensor> begins, ends;
    for (const MomentScores* v : videos) {
        begins.push_back(v->begin);
        ends.push_back(v->end);
    }
    Tensor begin_loss = cross_entropy_with_index(concat(begins, 0), b_gt);
    Tensor end_loss = cross_entropy_with_index(concat(ends, 0), e_gt);
    return add(begin_loss, end_loss);
}

Tensor video_ce_loss(const std::vector<Tensor>& scores) {
    if (scores.size() < 2) throw InvalidArgument("video_ce_loss: needs at least one negative");
    std::vector<Tensor> rows;
    for (const Tensor& s : scores) rows.push_back(reshape(s, {1}));
    return cross_entropy_with_index(concat(rows, 0), 0);
}

std::vector<std::string> sample_negatives(const RankList& list, const std::string& gt_video,
                                          int depth_extension_x, int n_neg,
                                          std::mt19937_64& rng) {
    const int p = list.rank_of(gt_video);
    if (p < 1) throw InvalidArgument("sample_negatives: gt video missing from rank list");
    const int depth = std::min<int>(p + depth_extension_x, static_cast<int>(list.entries.size()));
    std::vector<std::string> pool;
    for (int r = 0; r < depth; ++r) {
        const std::string& vid = list.entries[static_cast<size_t>(r)].first;
        if (vid != gt_video) pool.push_back(vid);
    }
    if (static_cast<int>(pool.size()) < n_neg)
        throw InvalidArgument("sample_negatives: fewer than n_neg candidates in depth window");
    std::vector<std::string> out;
    std::sample(pool.begin(), pool.end(), std::back_inserter(out), n_neg, rng);
    return out;
}

bool EarlyStopper::feed(int epoch, double metric) {
    new_best_ = false;
    if (!have_prev_ || metric > best_metric_) {
        best_metric_ = metric;
        best_epoch_ = epoch;
        new_best_ = true;
    }
    if (have_prev_ && metric < prev_)
        ++drops_;
    else
        drops_ = 0;
    prev_ = metric;
    have_prev_ = true;
    return drops_ >= patience_;
}

std::string TrainResult::metrics_tsv() const {
    std::string out;
    char buf[160];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.2f\t%.2f\t%.2f\n", e.epoch, e.loss, e.r1_05,
                      e.r1_07, e.sum);
        out += buf;
    }
    return out;
}

TrainResult train(Model& model, const Corpus& corpus, std::vector<QueryRecord> train_queries,
                  const std::vector<QueryRecord>& val_queries,
                  const std::vector<RankList>& rank_lists, const TrainOptions& opts) {
    PrecisionGuard prec(opts.precision);

    std::unordered_map<std::string, const RankList*> list_of;
    for (const RankList& rl : rank_lists) list_of[rl.query_id] = &rl;

    TrainResult result;

    // Exclude queries whose gt video is absent or ranked beyond the depth.
    std::vector<QueryRecord> queries;
    for (QueryRecord& q : train_queries) {
        auto it = list_of.find(q.id);
        const int p = it == list_of.end() ? 0 : it->second->rank_of(q.video_id);
        if (p >= 1 && p <= opts.exclusion_depth)
            queries.push_back(std::move(q));
        else
            ++result.excluded_queries;
    }
    if (queries.empty()) throw InvalidArgument("train: empty training set after exclusion");
    result.trained_queries = static_cast<int>(queries.size());

    const bool use_video_loss = opts.scoring == Scoring::exclusive;
    if (use_video_loss && !model.config().vs_head)
        throw InvalidArgument("train: exclusive scoring requires vs_head");

    AdamW optimizer(model.params(), {opts.lr, 0.9, 0.999, 1e-8, opts.weight_decay});
    std::mt19937_64 rng(opts.seed);
    EarlyStopper stopper(opts.patience);
    std::vector<std::vector<double>> best_params = model.params().snapshot();

    auto validate = [&]() {
        CorpusEncoding encoded = encode_corpus(model, corpus);
        std::vector<std::vector<ScoredMoment>> results;
        std::vector<QueryRecord> evaluated;
        for (const QueryRecord& q : val_queries) {
            auto it = list_of.find(q.id);
            if (it == list_of.end()) continue;
            results.push_back(
                vcmr_search(model, corpus, q, *it->second, opts.retrieval, &encoded));
            evaluated.push_back(q);
        }
        const double r05 = recall_at_k(results, evaluated, 1, 0.5, Task::vcmr);
        const double r07 = recall_at_k(results, evaluated, 1, 0.7, Task::vcmr);
        return std::make_pair(r05, r07);
    };

    model.params().zero_grad();
    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        std::shuffle(queries.begin(), queries.end(), rng);
        double loss_sum = 0.0;
        for (const QueryRecord& q : queries) {
            const RankList& rl = *list_of.at(q.id);
            const int p = rl.rank_of(q.video_id);
            const int depth = std::min<int>(p + opts.depth_extension_x,
                                            static_cast<int>(rl.entries.size()));
            const int eligible = depth - 1;  // window minus the gt itself
            const int n_neg = std::min(opts.n_neg, eligible);
            std::vector<std::string> negs;
            if (n_neg > 0)
                negs = sample_negatives(rl, q.video_id, opts.depth_extension_x, n_neg, rng);

            QueryContext qc = model.make_query_context(q.tokens);
            const VideoRecord& pos = corpus.require(q.video_id);
            auto [b_gt, e_gt] =
                align_ground_truth(q.begin_s, q.end_s, corpus.clip_len, pos.n_clips);

            std::vector<Model::VideoOutput> outs;
            outs.push_back(model.forward_video(model.encode(pos.visual, pos.textual), qc));
            for (const std::string& vid : negs) {
                const VideoRecord& rec = corpus.require(vid);
                outs.push_back(model.forward_video(model.encode(rec.visual, rec.textual), qc));
            }

            std::vector<const MomentScores*> scores;
            for (const Model::VideoOutput& o : outs) scores.push_back(&o.scores);
            Tensor loss = scale(shared_softmax_loss(scores, b_gt, e_gt), opts.loss_w_moment);
            if (use_video_loss && !negs.empty()) {
                std::vector<Tensor> vscores;
                for (const Model::VideoOutput& o : outs) vscores.push_back(o.video_score);
                loss = add(loss, scale(video_ce_loss(vscores), opts.loss_w_video));
            }

            backward(loss);
            optimizer.step();
            model.params().zero_grad();
            loss_sum += loss.item();
        }

        auto [r05, r07] = validate();
        EpochLog el;
        el.epoch = epoch;
        el.loss = loss_sum / static_cast<double>(queries.size());
        el.r1_05 = r05;
        el.r1_07 = r07;
        el.sum = r05 + r07;
        result.log.push_back(el);
        if (opts.verbose)
            std::cerr << "epoch " << epoch << "  loss " << el.loss << "  R1@0.5 " << r05
                      << "  R1@0.7 " << r07 << "  sum " << el.sum << "\n";

        const bool stop = stopper.feed(epoch, el.sum);
        if (stopper.is_new_best()) best_params = model.params().snapshot();
        if (stop) break;
    }

    model.params().restore(best_params);
    result.best_epoch = stopper.best_epoch();
    result.best_sum = stopper.best_metric();
    return result;
}

}  // namespace vcmr
