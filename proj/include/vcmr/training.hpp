#pragma once

#include <random>

#include "vcmr/heads.hpp"
#include "vcmr/optimizer.hpp"
#include "vcmr/retrieval.hpp"

namespace vcmr {

// Floor/ceil second timestamps onto clip indices, clamped to the video.
std::pair<int, int> align_ground_truth(double begin_s, double end_s, double clip_len,
                                       int n_clips);

// Eq-style shared normalization: begin scores of the positive (first) and
// all negative videos are concatenated and softmaxed jointly; loss is the
// NLL at the positive's gt index, summed over begin and end.
Tensor shared_softmax_loss(const std::vector<const MomentScores*>& videos, int b_gt, int e_gt);

// NLL of the positive (first) video similarity under a softmax over the
// whole mini-batch.
Tensor video_ce_loss(const std::vector<Tensor>& scores);

// n_neg distinct uniform draws from ranks 1..min(p+x, list size), excluding
// the gt video (rank p). Throws when fewer than n_neg candidates exist.
std::vector<std::string> sample_negatives(const RankList& list, const std::string& gt_video,
                                          int depth_extension_x, int n_neg,
                                          std::mt19937_64& rng);

// Stop after `patience` consecutive drops of the validation metric; tracks
// the best epoch. feed() returns true when training should stop.
class EarlyStopper {
   public:
    explicit EarlyStopper(int patience) : patience_(patience) {}

    bool feed(int epoch, double metric);
    int best_epoch() const { return best_epoch_; }
    double best_metric() const { return best_metric_; }
    bool is_new_best() const { return new_best_; }

   private:
    int patience_;
    int drops_ = 0;
    bool have_prev_ = false;
    double prev_ = 0.0;
    double best_metric_ = 0.0;
    int best_epoch_ = 0;
    bool new_best_ = false;
};

struct TrainOptions {
    double lr = 1e-4;
    double weight_decay = 0.01;
    int n_neg = 3;
    int depth_extension_x = 500;
    double loss_w_moment = 1e-2;
    double loss_w_video = 5e-2;
    Scoring scoring = Scoring::general;
    int patience = 3;
    int exclusion_depth = 100;
    int epochs = 30;
    Precision precision = Precision::f32;
    std::uint64_t seed = 42;
    RetrievalOptions retrieval;  // validation metric settings
    bool verbose = false;
};

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double r1_05 = 0.0;
    double r1_07 = 0.0;
    double sum = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = 0;
    double best_sum = 0.0;
    int trained_queries = 0;
    int excluded_queries = 0;

    std::string metrics_tsv() const;  // one tab-separated line per epoch
};

// End-to-end training loop: filters queries by stage-1 rank, one optimizer
// step per query with freshly sampled negatives each epoch, per-epoch
// validation, early stopping, best parameters restored on return.
TrainResult train(Model& model, const Corpus& corpus, std::vector<QueryRecord> train_queries,
                  const std::vector<QueryRecord>& val_queries,
                  const std::vector<RankList>& rank_lists, const TrainOptions& opts);

}  // namespace vcmr
