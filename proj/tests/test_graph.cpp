#include "amlbench/graph.hpp"
#include "amlbench/random.hpp"

#include "support/synthetic.hpp"

#include <doctest.h>

#include <fstream>
#include <numeric>
#include <set>

using namespace amlbench;
using amlbench::testing::TempDir;

namespace {

// Writes a features file row: id, time step, then 165 further values.
std::string feature_row(std::int64_t id, int step, double fill = 0.5) {
    std::string row = std::to_string(id) + "," + std::to_string(step);
    for (int c = 1; c < kLocalFeatureCount + kAggregatedFeatureCount; ++c) row += "," + std::to_string(fill + c);
    return row + "\n";
}

EllipticPaths write_toy(const std::filesystem::path& dir, const std::string& features, const std::string& classes,
                        const std::string& edges) {
    const auto paths = EllipticPaths::in_directory(dir);
    std::ofstream(paths.features) << features;
    std::ofstream(paths.classes) << classes;
    std::ofstream(paths.edgelist) << edges;
    return paths;
}

template <typename Fn>
std::string data_error_of(Fn&& fn) {
    try {
        fn();
    } catch (const DataError& e) {
        return e.what();
    }
    return "no error";
}

}  // namespace

TEST_CASE("three-node toy fixture") {
    TempDir dir("toy");
    const auto paths = write_toy(dir.path(), feature_row(230, 1) + feature_row(17, 1) + feature_row(99, 2),
                                 "txId,class\n230,2\n17,2\n99,2\n", "txId1,txId2\n230,17\n17,99\n");
    const Dataset ds = load_elliptic(paths);
    CHECK(ds.graph.num_nodes() == 3);
    CHECK(ds.graph.num_edges() == 2);
    const auto counts = count_labels(ds.table.labels);
    CHECK(counts.illicit == 0);
    CHECK(counts.licit == 3);
    // dense indices follow file order
    CHECK(ds.graph.dense_index(230) == NodeId{0});
    CHECK(ds.graph.dense_index(17) == NodeId{1});
    CHECK(ds.graph.dense_index(99) == NodeId{2});
    CHECK_FALSE(ds.graph.dense_index(5).has_value());
    CHECK(ds.graph.time_step(2) == 2);
    CHECK(ds.table.local_features(0, 0) == 1.0);  // the time step is local column 0
    CHECK(ds.table.local_features(0, 1) == doctest::Approx(1.5));
    CHECK(ds.table.aggregated_features.cols() == kAggregatedFeatureCount);
    CHECK(ds.table.aggregated_features(0, 0) == doctest::Approx(0.5 + 94));
    ds.graph.validate();
}

TEST_CASE("class tokens map to labels") {
    TempDir dir("labels");
    const auto paths = write_toy(dir.path(), feature_row(1, 1) + feature_row(2, 1) + feature_row(3, 1),
                                 "1,1\n2,2\n3,unknown\n", "");
    const Dataset ds = load_elliptic(paths);
    CHECK(ds.table.labels[0] == Label::Illicit);
    CHECK(ds.table.labels[1] == Label::Licit);
    CHECK(ds.table.labels[2] == Label::Unknown);
    CHECK(ds.graph.num_edges() == 0);
}

TEST_CASE("malformed inputs fail with row numbers") {
    TempDir dir("bad");
    const std::string ok_classes = "txId,class\n1,1\n2,2\n";

    SUBCASE("wrong column count") {
        const auto p = write_toy(dir.path(), feature_row(1, 1) + "2,1,3\n", ok_classes, "");
        const auto msg = data_error_of([&] { load_elliptic(p); });
        CHECK(msg.find("row 2") != std::string::npos);
        CHECK(msg.find("167") != std::string::npos);
    }
    SUBCASE("duplicate node id") {
        const auto p = write_toy(dir.path(), feature_row(1, 1) + feature_row(1, 1), ok_classes, "");
        const auto msg = data_error_of([&] { load_elliptic(p); });
        CHECK(msg.find("duplicate") != std::string::npos);
        CHECK(msg.find("row 2") != std::string::npos);
    }
    SUBCASE("unknown id in the edge list") {
        const auto p = write_toy(dir.path(), feature_row(1, 1) + feature_row(2, 1), ok_classes,
                                 "txId1,txId2\n1,2\n2,42\n");
        const auto msg = data_error_of([&] { load_elliptic(p); });
        CHECK(msg.find("unknown node id 42") != std::string::npos);
        CHECK(msg.find("row 3") != std::string::npos);
    }
    SUBCASE("non-numeric feature") {
        std::string bad = feature_row(2, 1);
        bad.replace(bad.find(",1.5"), 4, ",abc");
        const auto p = write_toy(dir.path(), feature_row(1, 1) + bad, ok_classes, "");
        CHECK(data_error_of([&] { load_elliptic(p); }).find("row 2") != std::string::npos);
    }
    SUBCASE("unrecognised class token") {
        const auto p = write_toy(dir.path(), feature_row(1, 1) + feature_row(2, 1), "1,7\n2,2\n", "");
        CHECK(data_error_of([&] { load_elliptic(p); }).find("row 1") != std::string::npos);
    }
    SUBCASE("missing file") {
        auto p = EllipticPaths::in_directory(dir.path() / "nowhere");
        CHECK_THROWS_AS(load_elliptic(p), DataError);
    }
}

TEST_CASE("undirected view") {
    const std::vector<std::pair<NodeId, NodeId>> edges = {{0, 1}, {1, 0}, {1, 2}, {2, 2}, {1, 2}};
    const auto g = TransactionGraph::from_edges(4, edges);
    CHECK(g.num_edges() == 5);  // the directed view keeps everything
    CHECK(g.out_degree(1) == 3);
    CHECK(g.in_degree(2) == 3);
    const auto u = undirected_view(g);
    CHECK(u.undirected());
    CHECK(u.num_edges() == 2);
    CHECK(std::vector<NodeId>(u.neighbors(1).begin(), u.neighbors(1).end()) == std::vector<NodeId>{0, 2});
    CHECK(std::vector<NodeId>(u.neighbors(2).begin(), u.neighbors(2).end()) == std::vector<NodeId>{1});
    CHECK(u.degree(3) == 0);
    CHECK(u.has_edge(0, 1));
    CHECK(u.has_edge(1, 0));
    CHECK_FALSE(u.has_edge(2, 2));
    u.validate();

    SUBCASE("single directed edge becomes symmetric") {
        const std::vector<std::pair<NodeId, NodeId>> one = {{0, 1}};
        const auto v = undirected_view(TransactionGraph::from_edges(2, one));
        CHECK(v.neighbors(0).size() == 1);
        CHECK(v.neighbors(1).size() == 1);
        CHECK(v.neighbors(1)[0] == 0);
    }
}

TEST_CASE("undirected view stores each pair once on random graphs") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.index(40);
        std::vector<std::pair<NodeId, NodeId>> edges;
        for (std::size_t e = 0; e < 3 * n; ++e)
            edges.emplace_back(static_cast<NodeId>(rng.index(n)), static_cast<NodeId>(rng.index(n)));
        const auto u = undirected_view(TransactionGraph::from_edges(n, edges));
        std::set<std::pair<NodeId, NodeId>> pairs;
        for (const auto& [a, b] : edges)
            if (a != b) pairs.insert({std::min(a, b), std::max(a, b)});
        CHECK(u.num_edges() == pairs.size());
        for (NodeId v = 0; v < n; ++v) {
            const auto nb = u.neighbors(v);
            CHECK(std::is_sorted(nb.begin(), nb.end()));
            CHECK(std::adjacent_find(nb.begin(), nb.end()) == nb.end());
            for (NodeId w : nb) CHECK(u.has_edge(w, v));
        }
        u.validate();
    }
}

TEST_CASE("temporal split") {
    CHECK(split_of_time_step(1) == Split::Train);
    CHECK(split_of_time_step(30) == Split::Train);
    CHECK(split_of_time_step(31) == Split::Validation);
    CHECK(split_of_time_step(40) == Split::Validation);
    CHECK(split_of_time_step(41) == Split::Test);
    CHECK(split_of_time_step(49) == Split::Test);
    CHECK_THROWS_AS(split_of_time_step(0), DataError);
    CHECK_THROWS_AS(split_of_time_step(50), DataError);

    const auto ds = testing::make_synthetic({.nodes_per_step = 10});
    const auto m = make_splits(ds.graph, ds.table);
    std::size_t covered = 0;
    for (std::size_t v = 0; v < ds.graph.num_nodes(); ++v) {
        const int in = m.train[v] + m.validation[v] + m.test[v];
        CHECK(in == 1);
        covered += static_cast<std::size_t>(in);
        CHECK(bool(m.supervised[v]) == (ds.table.labels[v] != Label::Unknown));
    }
    CHECK(covered == ds.graph.num_nodes());
    CHECK(m.train_counts.nodes + m.validation_counts.nodes + m.test_counts.nodes == ds.graph.num_nodes());
    for (NodeId v : m.labelled(Split::Test)) {
        CHECK(ds.graph.time_step(v) >= 41);
        CHECK(ds.table.labels[v] != Label::Unknown);
    }
    CHECK(m.labelled(Split::Train).size() == m.train_counts.labelled);

    SUBCASE("unknown node at step 45 is in the test mask but not supervised") {
        std::vector<int> steps = {45, 30, 41};
        const auto g = TransactionGraph::from_edges(3, {}, steps);
        NodeTable t;
        t.labels = {Label::Unknown, Label::Licit, Label::Illicit};
        const auto s = make_splits(g, t);
        CHECK(s.test[0] == 1);
        CHECK(s.supervised[0] == 0);
        CHECK(s.train[1] == 1);
        CHECK(s.test[2] == 1);
        CHECK(s.test_counts.labelled == 1);
        CHECK(s.test_counts.illicit == 1);
    }
}

TEST_CASE("export and reload round-trips the dataset") {
    TempDir dir("roundtrip");
    const auto original = testing::make_synthetic({.nodes_per_step = 8, .seed = 3});
    const auto paths = EllipticPaths::in_directory(dir.path());
    write_elliptic(original, paths);
    const Dataset again = load_elliptic(paths);
    REQUIRE(again.graph.num_nodes() == original.graph.num_nodes());
    CHECK(again.graph.out_offsets() == original.graph.out_offsets());
    CHECK(again.graph.out_targets() == original.graph.out_targets());
    CHECK(again.graph.in_offsets() == original.graph.in_offsets());
    // In-lists are rebuilt from the exported edge order; compare them as sets.
    for (NodeId v = 0; v < again.graph.num_nodes(); ++v) {
        auto a = std::vector<NodeId>(again.graph.in_neighbors(v).begin(), again.graph.in_neighbors(v).end());
        auto b = std::vector<NodeId>(original.graph.in_neighbors(v).begin(), original.graph.in_neighbors(v).end());
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }
    CHECK(again.graph.external_ids() == original.graph.external_ids());
    CHECK(again.graph.time_steps() == original.graph.time_steps());
    CHECK(again.table.labels == original.table.labels);
    CHECK(again.table.local_features == original.table.local_features);
    CHECK(again.table.aggregated_features == original.table.aggregated_features);
}

TEST_CASE("manifest and canonical checks") {
    const auto ds = testing::make_synthetic({.nodes_per_step = 5});
    const auto m = make_manifest(ds);
    CHECK(m.num_nodes == ds.graph.num_nodes());
    CHECK(m.num_time_steps == 49);
    CHECK(m.undirected_edges <= m.num_edges);
    const std::string text = m.to_text();
    CHECK(text.find("num_nodes=" + std::to_string(ds.graph.num_nodes())) != std::string::npos);
    const auto mismatches = canonical_mismatches(ds);
    CHECK(mismatches.size() == 4);  // everything but the time-step count differs
}
