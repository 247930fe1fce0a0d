#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vcmr/container.hpp"
#include "vcmr/data.hpp"
#include "vcmr/error.hpp"

using namespace vcmr;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

std::vector<double> vec(int n, double v) { return std::vector<double>(static_cast<size_t>(n), v); }

}  // namespace

TEST_CASE("subtitle assignment follows the overlap rule") {
    const int dim = 2;
    SUBCASE("span covering two clips is assigned to both") {
        std::vector<SubtitleSpan> spans{{0.0, 3.0, {1.0, 2.0}}};
        Matrix m = assign_subtitles(spans, 1.5, 3, dim);
        CHECK(m.at(0, 0) == 1.0);
        CHECK(m.at(1, 1) == 2.0);
        CHECK(m.at(2, 0) == 0.0);
    }
    SUBCASE("a span touching a boundary lands in both neighbors") {
        std::vector<SubtitleSpan> spans{{1.4, 1.6, {5.0, 5.0}}};
        Matrix m = assign_subtitles(spans, 1.5, 3, dim);
        CHECK(m.at(0, 0) == 5.0);
        CHECK(m.at(1, 0) == 5.0);
        CHECK(m.at(2, 0) == 0.0);
    }
    SUBCASE("no spans give zero vectors") {
        Matrix m = assign_subtitles({}, 1.5, 4, dim);
        for (double v : m.data) CHECK(v == 0.0);
    }
    SUBCASE("overlapping spans are mean-pooled") {
        std::vector<SubtitleSpan> spans{{0.0, 1.0, {2.0, 0.0}}, {0.5, 1.2, {4.0, 2.0}}};
        Matrix m = assign_subtitles(spans, 1.5, 1, dim);
        CHECK(m.at(0, 0) == doctest::Approx(3.0));
        CHECK(m.at(0, 1) == doctest::Approx(1.0));
    }
    SUBCASE("degenerate spans are rejected") {
        std::vector<SubtitleSpan> spans{{2.0, 2.0, {0.0, 0.0}}};
        CHECK_THROWS_AS(assign_subtitles(spans, 1.5, 3, dim), InvalidArgument);
    }
}

TEST_CASE("corpus round-trips through the manifest and containers") {
    const std::string dir = temp_dir("vcmr_data_roundtrip");
    SyntheticSpec spec;
    spec.videos = 4;
    spec.clips_min = 3;
    spec.clips_max = 6;
    spec.queries_per_video = 2;
    spec.dim_visual = 7;
    spec.dim_textual = 5;
    spec.span_min = 1;
    spec.span_max = 3;
    spec.tokens_min = 2;
    spec.tokens_max = 4;
    spec.val_fraction = 0.5;
    spec.seed = 17;
    SyntheticData data = generate_synthetic(spec);
    write_synthetic(data, dir);

    Corpus loaded = load_corpus(dir + "/corpus.tsv", spec.clip_len, 100, 7, 5);
    REQUIRE(loaded.videos.size() == data.corpus.videos.size());
    for (size_t i = 0; i < loaded.videos.size(); ++i) {
        CHECK(loaded.videos[i].id == data.corpus.videos[i].id);
        CHECK(loaded.videos[i].n_clips == data.corpus.videos[i].n_clips);
        CHECK(loaded.videos[i].visual.data == data.corpus.videos[i].visual.data);   // bitwise
        CHECK(loaded.videos[i].textual.data == data.corpus.videos[i].textual.data); // bitwise
    }

    auto train_q = load_queries(dir + "/queries_train.tsv", 5);
    auto val_q = load_queries(dir + "/queries_val.tsv", 5);
    CHECK(train_q.size() == data.train_queries.size());
    CHECK(val_q.size() == data.val_queries.size());
    CHECK(train_q[0].tokens.data == data.train_queries[0].tokens.data);
    CHECK(!train_q[0].tag.empty());

    auto ranks = load_rank_lists(dir + "/ranks.tsv");
    CHECK(ranks.size() == data.rank_lists.size());
    for (size_t i = 0; i < ranks.size(); ++i)
        CHECK(ranks[i].entries == data.rank_lists[i].entries);
    fs::remove_all(dir);
}

TEST_CASE("dimension mismatches produce typed errors naming the file") {
    const std::string dir = temp_dir("vcmr_data_dimerr");
    SyntheticSpec spec;
    spec.videos = 2;
    spec.clips_min = 2;
    spec.clips_max = 3;
    spec.queries_per_video = 1;
    spec.dim_visual = 4;
    spec.dim_textual = 3;
    spec.span_min = 1;
    spec.span_max = 2;
    spec.tokens_min = 2;
    spec.tokens_max = 2;
    spec.val_fraction = 0.0;
    SyntheticData data = generate_synthetic(spec);
    write_synthetic(data, dir);

    try {
        load_corpus(dir + "/corpus.tsv", spec.clip_len, 100, 9, 3);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("v0000.bin") != std::string::npos);
        CHECK(msg.find("9") != std::string::npos);   // expected dim
        CHECK(msg.find("4") != std::string::npos);   // actual dim
    }
    fs::remove_all(dir);
}

TEST_CASE("manifest with two videos yields two records") {
    const std::string dir = temp_dir("vcmr_data_manifest");
    write_container(dir + "/a.bin", {{"visual", {2, 3}, vec(6, 1.0)},
                                     {"textual", {2, 2}, vec(4, 2.0)}});
    write_container(dir + "/b.bin", {{"visual", {4, 3}, vec(12, 3.0)}});
    std::ofstream manifest(dir + "/corpus.tsv");
    manifest << "a\t3.0\ta.bin\ta.bin\t-\n";
    manifest << "b\t6.0\tb.bin\t-\t-\n";
    manifest.close();

    Corpus corpus = load_corpus(dir + "/corpus.tsv", 1.5, 100, 3, 2);
    REQUIRE(corpus.videos.size() == 2);
    CHECK(corpus.videos[0].n_clips == 2);
    CHECK(corpus.videos[1].n_clips == 4);
    // no textual source: zero vectors
    for (double v : corpus.videos[1].textual.data) CHECK(v == 0.0);
    fs::remove_all(dir);
}

TEST_CASE("videos longer than max_clips are truncated") {
    const std::string dir = temp_dir("vcmr_data_trunc");
    write_container(dir + "/long.bin", {{"visual", {10, 2}, vec(20, 1.0)}});
    std::ofstream manifest(dir + "/corpus.tsv");
    manifest << "long\t15.0\tlong.bin\t-\t-\n";
    manifest.close();
    Corpus corpus = load_corpus(dir + "/corpus.tsv", 1.5, 6, 2, 2);
    CHECK(corpus.videos[0].n_clips == 6);
    CHECK(corpus.videos[0].visual.rows == 6);
    fs::remove_all(dir);
}

TEST_CASE("subtitles are assigned when no textual features are given") {
    const std::string dir = temp_dir("vcmr_data_subs");
    write_container(dir + "/v.bin", {{"visual", {2, 2}, vec(4, 1.0)}});
    write_container(dir + "/s.bin", {{"sub_times", {1, 2}, {0.2, 0.9}},
                                     {"sub_features", {1, 3}, {7.0, 8.0, 9.0}}});
    std::ofstream manifest(dir + "/corpus.tsv");
    manifest << "v\t3.0\tv.bin\t-\ts.bin\n";
    manifest.close();
    Corpus corpus = load_corpus(dir + "/corpus.tsv", 1.5, 100, 2, 3);
    CHECK(corpus.videos[0].textual.at(0, 0) == 7.0);
    CHECK(corpus.videos[0].textual.at(1, 0) == 0.0);
    fs::remove_all(dir);
}

TEST_CASE("generation is deterministic in the seed") {
    SyntheticSpec spec;
    spec.videos = 3;
    spec.clips_min = 3;
    spec.clips_max = 5;
    spec.queries_per_video = 2;
    spec.dim_visual = 4;
    spec.dim_textual = 3;
    spec.span_min = 1;
    spec.span_max = 2;
    spec.tokens_min = 2;
    spec.tokens_max = 3;
    spec.seed = 99;
    SyntheticData a = generate_synthetic(spec);
    SyntheticData b = generate_synthetic(spec);
    for (size_t i = 0; i < a.corpus.videos.size(); ++i) {
        CHECK(a.corpus.videos[i].visual.data == b.corpus.videos[i].visual.data);
        CHECK(a.corpus.videos[i].textual.data == b.corpus.videos[i].textual.data);
    }
    for (size_t i = 0; i < a.rank_lists.size(); ++i)
        CHECK(a.rank_lists[i].entries == b.rank_lists[i].entries);
    SyntheticSpec other = spec;
    other.seed = 100;
    SyntheticData c = generate_synthetic(other);
    CHECK(a.corpus.videos[0].visual.data != c.corpus.videos[0].visual.data);
}

TEST_CASE("gt spans respect the configured length bounds and clip grid") {
    SyntheticSpec spec;
    spec.videos = 8;
    spec.clips_min = 6;
    spec.clips_max = 12;
    spec.queries_per_video = 3;
    spec.span_min = 2;
    spec.span_max = 5;
    spec.seed = 31;
    SyntheticData data = generate_synthetic(spec);
    auto check_queries = [&](const std::vector<QueryRecord>& qs) {
        for (const QueryRecord& q : qs) {
            const double len_clips = (q.end_s - q.begin_s) / spec.clip_len;
            CHECK(len_clips >= spec.span_min);
            CHECK(len_clips <= spec.span_max);
            CHECK(std::abs(q.begin_s / spec.clip_len -
                           std::round(q.begin_s / spec.clip_len)) < 1e-9);
            const VideoRecord& v = data.corpus.require(q.video_id);
            CHECK(q.end_s <= v.duration + 1e-9);
        }
    };
    check_queries(data.train_queries);
    check_queries(data.val_queries);
}

TEST_CASE("beta=1 leaves the textual channel statistically at noise level") {
    SyntheticSpec spec;
    spec.videos = 20;
    spec.clips_min = 8;
    spec.clips_max = 10;
    spec.queries_per_video = 2;
    spec.beta = 1.0;
    spec.snr = 3.0;
    spec.dim_visual = 16;
    spec.dim_textual = 16;
    spec.seed = 7;
    SyntheticData data = generate_synthetic(spec);

    // Mean absolute per-clip feature magnitude inside gt spans: the visual
    // channel carries the planted signal, textual stays at the noise floor.
    double vis_ss = 0, txt_ss = 0;
    int count = 0;
    auto scan = [&](const std::vector<QueryRecord>& qs) {
        for (const QueryRecord& q : qs) {
            const VideoRecord& v = data.corpus.require(q.video_id);
            const int b = static_cast<int>(q.begin_s / spec.clip_len);
            const int e = static_cast<int>(q.end_s / spec.clip_len) - 1;
            for (int i = b; i <= e; ++i) {
                for (int j = 0; j < spec.dim_visual; ++j) vis_ss += v.visual.at(i, j) * v.visual.at(i, j);
                for (int j = 0; j < spec.dim_textual; ++j) txt_ss += v.textual.at(i, j) * v.textual.at(i, j);
                ++count;
            }
        }
    };
    scan(data.train_queries);
    scan(data.val_queries);
    const double vis_ms = vis_ss / (count * spec.dim_visual);
    const double txt_ms = txt_ss / (count * spec.dim_textual);
    // noise variance is 1; textual mean square must stay within 3 sigma of 1
    const double sigma = std::sqrt(2.0 / (count * spec.dim_textual));
    CHECK(std::abs(txt_ms - 1.0) < 3.0 * sigma + 0.05);
    CHECK(vis_ms > 2.0);  // signal present in the visual channel
}

TEST_CASE("planted rank lists put gt exactly at the requested rank") {
    std::mt19937_64 rng(3);
    std::vector<std::string> ids{"a", "b", "c", "d", "e"};
    for (int p = 1; p <= 5; ++p) {
        RankList rl = plant_rank_list(ids, "q", "c", p, 0.0, rng);
        CHECK(rl.rank_of("c") == p);
        CHECK(rl.entries.size() == 5);
        for (size_t i = 1; i < rl.entries.size(); ++i)
            CHECK(rl.entries[i - 1].second > rl.entries[i].second);
    }
}
