#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "vcmr/config.hpp"
#include "vcmr/container.hpp"
#include "vcmr/evaluation.hpp"
#include "vcmr/gradcheck.hpp"
#include "vcmr/model.hpp"
#include "vcmr/training.hpp"

namespace fs = std::filesystem;
using namespace vcmr;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig cfg = args.config_path.empty() ? RunConfig{} : RunConfig::from_file(args.config_path);
    for (const std::string& kv : args.overrides) cfg.apply_override(kv);
    cfg.finalize();
    return cfg;
}

void log_config(const RunConfig& cfg, const std::string& out_dir) {
    std::cerr << "resolved config:\n" << cfg.resolved_text();
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream os(fs::path(out_dir) / "run_config.txt");
        os << cfg.resolved_text();
    }
}

struct LoadedData {
    Corpus corpus;
    std::vector<QueryRecord> train_queries;
    std::vector<QueryRecord> val_queries;
    std::vector<RankList> ranks;
};

LoadedData load_data(const RunConfig& cfg, const std::string& data_dir, bool need_train) {
    LoadedData d;
    d.corpus = load_corpus((fs::path(data_dir) / "corpus.tsv").string(), cfg.clip_len,
                           cfg.model.max_clips, cfg.model.dim_visual, cfg.model.dim_textual);
    const auto train_path = fs::path(data_dir) / "queries_train.tsv";
    if (need_train || fs::exists(train_path))
        d.train_queries = load_queries(train_path.string(), cfg.model.dim_textual);
    d.val_queries = load_queries((fs::path(data_dir) / "queries_val.tsv").string(),
                                 cfg.model.dim_textual);
    const auto ranks_path = fs::path(data_dir) / "ranks.tsv";
    if (fs::exists(ranks_path)) d.ranks = load_rank_lists(ranks_path.string());
    return d;
}

std::vector<RankList> stage1_lists(const RunConfig& cfg, const Model& model,
                                   const LoadedData& data,
                                   const std::vector<QueryRecord>& queries) {
    if (cfg.stage1 == "simplified") {
        std::vector<RankList> lists;
        for (const QueryRecord& q : queries)
            lists.push_back(stage1_rank_simplified(model, data.corpus, q));
        return lists;
    }
    if (data.ranks.empty())
        throw IoError("stage1=file but no ranks.tsv found in the data directory");
    return data.ranks;
}

const RankList& list_for(const std::vector<RankList>& lists, const std::string& query_id) {
    for (const RankList& rl : lists)
        if (rl.query_id == query_id) return rl;
    throw InvalidArgument("no stage-1 rank list for query " + query_id);
}

int cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
    log_config(cfg, out_dir);
    SyntheticData data = generate_synthetic(cfg.synth);
    write_synthetic(data, out_dir);
    std::cout << "synthetic corpus written to " << out_dir << ": " << data.corpus.videos.size()
              << " videos, " << data.train_queries.size() << " train / "
              << data.val_queries.size() << " val queries\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir) {
    log_config(cfg, out_dir);
    LoadedData data = load_data(cfg, data_dir, true);
    Model model(cfg.model, cfg.seed);
    auto lists = stage1_lists(cfg, model, data, data.train_queries);

    TrainOptions opts = cfg.train;
    opts.verbose = true;
    TrainResult result = train(model, data.corpus, data.train_queries, data.val_queries, lists,
                               opts);

    fs::create_directories(out_dir);
    const std::string ckpt = (fs::path(out_dir) / "checkpoint.bin").string();
    model.save(ckpt);
    std::ofstream metrics(fs::path(out_dir) / "metrics.tsv");
    metrics << result.metrics_tsv();
    std::cout << "trained " << result.trained_queries << " queries (" << result.excluded_queries
              << " excluded), best epoch " << result.best_epoch << " (sum " << result.best_sum
              << ")\ncheckpoint: " << ckpt << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& data_dir, const std::string& ckpt,
             const std::string& out_dir) {
    log_config(cfg, out_dir);
    LoadedData data = load_data(cfg, data_dir, false);
    Model model(cfg.model, cfg.seed);
    model.load(ckpt);

    auto lists = stage1_lists(cfg, model, data, data.val_queries);
    CorpusEncoding encoded = encode_corpus(model, data.corpus);
    std::vector<std::vector<ScoredMoment>> results;
    std::vector<QueryRecord> evaluated;
    std::vector<RankList> used_lists;
    for (const QueryRecord& q : data.val_queries) {
        const RankList& rl = list_for(lists, q.id);
        results.push_back(vcmr_search(model, data.corpus, q, rl, cfg.retrieval, &encoded));
        evaluated.push_back(q);
        used_lists.push_back(rl);
    }
    EvalReport rep = evaluate(results, evaluated, used_lists, EvalOptions{}, cfg.retrieval.top_k);
    std::cout << rep.to_table() << "\n" << rep.to_kv();
    if (!out_dir.empty()) {
        std::ofstream table(fs::path(out_dir) / "report.txt");
        table << rep.to_table();
        std::ofstream kv(fs::path(out_dir) / "report.kv");
        kv << rep.to_kv();
    }
    return 0;
}

int cmd_search(const RunConfig& cfg, const std::string& data_dir, const std::string& ckpt,
               const std::string& query_file) {
    LoadedData data = load_data(cfg, data_dir, false);
    Model model(cfg.model, cfg.seed);
    model.load(ckpt);
    auto queries = load_queries(query_file, cfg.model.dim_textual);
    auto lists = stage1_lists(cfg, model, data, queries);
    CorpusEncoding encoded = encode_corpus(model, data.corpus);

    std::cout.precision(6);
    for (const QueryRecord& q : queries) {
        const RankList& rl = list_for(lists, q.id);
        auto moments = vcmr_search(model, data.corpus, q, rl, cfg.retrieval, &encoded);
        int rank = 1;
        for (const ScoredMoment& m : moments) {
            std::cout << q.id << '\t' << rank++ << '\t' << m.video_id << '\t' << m.t0 << '\t'
                      << m.t1 << '\t' << m.score << '\n';
        }
    }
    return 0;
}

int cmd_gradcheck(int seeds) {
    auto results = run_op_gradchecks(seeds);
    results.push_back(run_composite_gradcheck());
    std::cout << gradcheck_table(results);
    for (const GradCheckResult& r : results)
        if (!r.pass) return 1;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-stage video corpus moment retrieval"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string data_dir, out_dir, ckpt, query_file;
    int gradcheck_seeds = 20;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "key=value config file");
        sub->add_option("--set", common.overrides, "config override key=value (repeatable)");
    };
    auto add_spec_flags = [&](CLI::App* sub) {
        // direct flags forwarded as overrides
        static std::string scoring, qdf, vs, bounds;
        static int top_k = -1;
        static double nms_iou = -1.0;
        sub->add_option("--scoring", scoring, "general|exclusive|disjoint")
            ->each([&](const std::string& v) { common.overrides.push_back("scoring=" + v); });
        sub->add_option("--top-k", top_k, "stage-1 pool size")
            ->each([&](const std::string& v) { common.overrides.push_back("top_k=" + v); });
        sub->add_option("--nms-iou", nms_iou, "NMS IoU threshold")
            ->each([&](const std::string& v) { common.overrides.push_back("nms_iou=" + v); });
        sub->add_option("--bounds", bounds, "Lmin,Lmax moment length bounds")
            ->each([&](const std::string& v) {
                const auto comma = v.find(',');
                if (comma == std::string::npos)
                    throw CLI::ValidationError("--bounds expects Lmin,Lmax");
                common.overrides.push_back("l_min=" + v.substr(0, comma));
                common.overrides.push_back("l_max=" + v.substr(comma + 1));
            });
        sub->add_option("--qdf", qdf, "learned|average")
            ->each([&](const std::string& v) { common.overrides.push_back("qdf=" + v); });
        sub->add_option("--vs-head", vs, "on|off")
            ->each([&](const std::string& v) { common.overrides.push_back("vs_head=" + v); });
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    add_common(synth);
    synth->add_option("--out", out_dir, "output directory")->required();

    CLI::App* train_cmd = app.add_subcommand("train", "train a model");
    add_common(train_cmd);
    add_spec_flags(train_cmd);
    train_cmd->add_option("--data", data_dir, "data directory")->required();
    train_cmd->add_option("--out", out_dir, "output directory")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval_cmd);
    add_spec_flags(eval_cmd);
    eval_cmd->add_option("--data", data_dir, "data directory")->required();
    eval_cmd->add_option("--checkpoint", ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--out", out_dir, "report output directory");

    CLI::App* search_cmd = app.add_subcommand("search", "rank moments for queries");
    add_common(search_cmd);
    add_spec_flags(search_cmd);
    search_cmd->add_option("--data", data_dir, "data directory")->required();
    search_cmd->add_option("--checkpoint", ckpt, "checkpoint file")->required();
    search_cmd->add_option("--query-file", query_file, "queries tsv")->required();

    CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference op checks");
    gradcheck_cmd->add_option("--seeds", gradcheck_seeds, "random inputs per op");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(resolve_config(common), out_dir);
        if (train_cmd->parsed()) return cmd_train(resolve_config(common), data_dir, out_dir);
        if (eval_cmd->parsed()) return cmd_eval(resolve_config(common), data_dir, ckpt, out_dir);
        if (search_cmd->parsed())
            return cmd_search(resolve_config(common), data_dir, ckpt, query_file);
        if (gradcheck_cmd->parsed()) return cmd_gradcheck(gradcheck_seeds);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
