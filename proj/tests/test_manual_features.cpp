#include "amlbench/manual_features.hpp"
#include "amlbench/random.hpp"

#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace amlbench;
using namespace amlbench::testing;

TEST_CASE("egonet density fixtures") {
    const auto tri = undirected(3, {{0, 1}, {1, 2}, {2, 0}});
    for (NodeId v = 0; v < 3; ++v) CHECK(egonet_density(tri, v) == 1.0);

    const auto star = star_graph(4);
    CHECK(egonet_density(star, 0) == doctest::Approx(0.4));  // 4 edges of 10 possible
    CHECK(egonet_density(star, 1) == 1.0);                   // a leaf and its hub

    const auto iso = undirected(2, {});
    CHECK(egonet_density(iso, 0) == 0.0);

    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        const auto g = random_undirected(rng, 2 + rng.index(25), 0.25);
        const auto d = egonet_densities(g);
        for (NodeId v = 0; v < g.num_nodes(); ++v) {
            CHECK(d[v] == doctest::Approx(brute_egonet_density(g, v)).epsilon(1e-15));
            CHECK(d[v] >= 0.0);
            CHECK(d[v] <= 1.0);
        }
    }
}

TEST_CASE("neighbour density statistics") {
    // 0 - 1 - 2 with injected densities
    const auto g = undirected(4, {{0, 1}, {1, 2}});
    const std::vector<double> dens = {0.2, 0.4, 0.6, 0.9};
    const auto s = neighbor_density_stats(g, dens);
    CHECK(s.min[0] == 0.4);
    CHECK(s.mean[0] == 0.4);
    CHECK(s.max[0] == 0.4);
    CHECK(s.min[1] == 0.2);
    CHECK(s.mean[1] == doctest::Approx(0.4));
    CHECK(s.max[1] == 0.6);
    CHECK(s.min[3] == 0.0);
    CHECK(s.mean[3] == 0.0);
    CHECK(s.max[3] == 0.0);
}

TEST_CASE("betweenness fixtures") {
    const auto path = path_graph(3);
    auto b = betweenness(path, 0, 0);
    CHECK(b[1] == doctest::Approx(1.0));
    CHECK(b[0] == 0.0);
    CHECK(b[2] == 0.0);

    const auto star = star_graph(5);
    b = betweenness(star, 0, 0);
    CHECK(b[0] == doctest::Approx(1.0));
    for (NodeId v = 1; v <= 5; ++v) CHECK(b[v] == 0.0);

    SUBCASE("matches all-pairs path counting") {
        Rng rng(5);
        for (int t = 0; t < 25; ++t) {
            const auto g = random_undirected(rng, 3 + rng.index(30), 0.15);
            const auto want = brute_betweenness(g);
            const auto got = betweenness(g, 0, 0);
            for (NodeId v = 0; v < g.num_nodes(); ++v) CHECK(std::abs(got[v] - want[v]) <= 1e-9);
        }
    }
    SUBCASE("sampling every pivot reproduces the exact value") {
        Rng rng(6);
        for (int t = 0; t < 10; ++t) {
            const auto g = random_undirected(rng, 20 + rng.index(180), 0.03);
            const auto exact = betweenness(g, 0, 1);
            const auto all = betweenness(g, g.num_nodes(), 99);
            for (NodeId v = 0; v < g.num_nodes(); ++v) CHECK(std::abs(all[v] - exact[v]) <= 1e-9);
        }
    }
    SUBCASE("pivot estimate is unbiased") {
        Rng rng(7);
        const auto g = random_undirected(rng, 60, 0.06);
        const auto exact = betweenness(g, 0, 0);
        std::vector<double> avg(g.num_nodes(), 0.0);
        const int reps = 400;
        for (int r = 0; r < reps; ++r) {
            const auto est = betweenness(g, 15, static_cast<std::uint64_t>(r));
            for (NodeId v = 0; v < g.num_nodes(); ++v) avg[v] += est[v] / reps;
        }
        double total_exact = 0.0, total_err = 0.0;
        for (NodeId v = 0; v < g.num_nodes(); ++v) {
            total_exact += exact[v];
            total_err += std::abs(avg[v] - exact[v]);
        }
        CHECK(total_err < 0.05 * total_exact);
    }
    SUBCASE("thread count does not change the result beyond rounding") {
        Rng rng(8);
        const auto g = random_undirected(rng, 120, 0.04);
        const auto one = betweenness(g, 40, 3, 1);
        const auto four = betweenness(g, 40, 3, 4);
        for (NodeId v = 0; v < g.num_nodes(); ++v) CHECK(std::abs(one[v] - four[v]) <= 1e-9);
        CHECK(betweenness(g, 40, 3, 1) == one);
    }
}

TEST_CASE("closeness fixtures") {
    const auto k3 = undirected(3, {{0, 1}, {1, 2}, {0, 2}});
    for (double c : closeness(k3)) CHECK(c == doctest::Approx(1.0));
    const auto path = closeness(path_graph(3));
    CHECK(path[1] == doctest::Approx(1.0));
    CHECK(path[0] == doctest::Approx(2.0 / 3.0));
    CHECK(path[2] == doctest::Approx(2.0 / 3.0));
    CHECK(closeness(undirected(3, {{0, 1}}))[2] == 0.0);

    Rng rng(9);
    for (int t = 0; t < 25; ++t) {
        const auto g = random_undirected(rng, 2 + rng.index(30), 0.1);
        const auto want = brute_closeness(g);
        const auto got = closeness(g, 1 + t % 3);
        for (NodeId v = 0; v < g.num_nodes(); ++v) {
            CHECK(std::abs(got[v] - want[v]) <= 1e-12);
            CHECK(got[v] >= 0.0);
            CHECK(got[v] <= 1.0);
        }
    }
}

TEST_CASE("eigenvector centrality fixtures") {
    const PowerIterationOptions tight{.tol = 1e-14, .max_iter = 100000, .start = {}};
    const auto cycle = undirected(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}});
    for (double x : eigenvector_centrality(cycle, tight).values) CHECK(x == doctest::Approx(1.0 / std::sqrt(6.0)));

    const auto star = eigenvector_centrality(star_graph(4), tight).values;
    // Dominant eigenpair of the 4-leaf star: lambda = 2, centre = 2 * leaf.
    CHECK(star[0] > star[1]);
    CHECK(star[0] == doctest::Approx(2.0 * star[1]));
    CHECK(star[0] == doctest::Approx(1.0 / std::sqrt(2.0)));

    // K4 and K3: the larger clique has the dominant eigenvalue 3.
    const auto cliques =
        undirected(7, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}, {4, 5}, {5, 6}, {4, 6}});
    const auto e = eigenvector_centrality(cliques, tight).values;
    for (NodeId v = 0; v < 4; ++v) CHECK(e[v] == doctest::Approx(0.5));
    for (NodeId v = 4; v < 7; ++v) CHECK(std::abs(e[v]) < 1e-9);

    SUBCASE("matches a dense eigensolver on connected graphs") {
        Rng rng(10);
        for (int t = 0; t < 15; ++t) {
            const auto g = random_connected(rng, 3 + rng.index(25), 0.2);
            const auto want = dense_dominant_eigenvector(g);
            const auto got = eigenvector_centrality(g, tight).values;
            double norm = 0.0;
            for (NodeId v = 0; v < g.num_nodes(); ++v) {
                CHECK(std::abs(got[v] - want[v]) <= 1e-9);
                CHECK(got[v] >= 0.0);
                norm += got[v] * got[v];
            }
            CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-9);
        }
    }
    SUBCASE("start vector does not matter up to tolerance") {
        Rng rng(11);
        const auto g = random_connected(rng, 40, 0.1);
        PowerIterationOptions a{.tol = 1e-10, .max_iter = 100000, .start = {}};
        PowerIterationOptions b = a;
        for (NodeId v = 0; v < g.num_nodes(); ++v) {
            a.start.push_back(0.1 + rng.uniform());
            b.start.push_back(0.1 + rng.uniform());
        }
        const auto x = eigenvector_centrality(g, a).values;
        const auto y = eigenvector_centrality(g, b).values;
        for (NodeId v = 0; v < g.num_nodes(); ++v) CHECK(std::abs(x[v] - y[v]) <= 10 * a.tol);
    }
    SUBCASE("non-convergence is reported") {
        Rng rng(12);
        const auto g = random_connected(rng, 30, 0.1);
        CHECK_THROWS_AS(eigenvector_centrality(g, {.tol = 1e-15, .max_iter = 2, .start = {}}), NonConvergence);
    }
}

TEST_CASE("pagerank fixtures") {
    const std::vector<std::pair<NodeId, NodeId>> cyc = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};
    const auto cycle = TransactionGraph::from_edges(4, cyc);
    for (double alpha : {0.1, 0.593, 0.9})
        for (double x : pagerank(cycle, alpha).values) CHECK(x == doctest::Approx(0.25));

    const std::vector<std::pair<NodeId, NodeId>> ab = {{0, 1}};
    const auto two = pagerank(TransactionGraph::from_edges(2, ab), 0.5).values;
    CHECK(std::abs(two[0] - 0.4) <= 1e-9);
    CHECK(std::abs(two[1] - 0.6) <= 1e-9);

    SUBCASE("matches a dense linear solve") {
        Rng rng(13);
        for (int t = 0; t < 20; ++t) {
            const auto g = random_directed(rng, 2 + rng.index(30), 0.1);
            const double alpha = rng.uniform(0.1, 0.9);
            const auto want = dense_pagerank(g, alpha);
            const auto got = pagerank(g, alpha, {.tol = 1e-14, .max_iter = 10000, .start = {}}).values;
            double total = 0.0;
            for (NodeId v = 0; v < g.num_nodes(); ++v) {
                CHECK(std::abs(got[v] - want[v]) <= 1e-9);
                CHECK(got[v] > 0.0);
                total += got[v];
            }
            CHECK(std::abs(total - 1.0) <= 1e-9);
        }
    }
    SUBCASE("relabelling nodes permutes the scores") {
        Rng rng(14);
        const auto g = random_directed(rng, 50, 0.05);
        std::vector<NodeId> perm(50);
        std::iota(perm.begin(), perm.end(), NodeId{0});
        for (std::size_t i = 49; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
        std::vector<std::pair<NodeId, NodeId>> relabelled;
        for (const auto& [u, v] : g.edge_list()) relabelled.emplace_back(perm[u], perm[v]);
        const auto h = TransactionGraph::from_edges(50, relabelled);
        const auto x = pagerank(g, 0.593).values;
        const auto y = pagerank(h, 0.593).values;
        for (NodeId v = 0; v < 50; ++v) CHECK(std::abs(x[v] - y[perm[v]]) <= 1e-12);
    }
}

TEST_CASE("manual feature set on the synthetic dataset") {
    const auto ds = make_synthetic({.nodes_per_step = 12});
    ManualFeatureConfig cfg;
    cfg.betweenness_pivots = 0;
    const auto f = compute_manual_features(ds.graph, cfg);
    const auto m = f.as_matrix();
    CHECK(m.cols() == 8);
    CHECK(ManualFeatureSet::column_names().size() == 8);
    CHECK(m.allFinite());
    double pr = 0.0, eig = 0.0;
    for (NodeId v = 0; v < f.num_nodes(); ++v) {
        pr += f.pagerank[v];
        eig += f.eigenvector[v] * f.eigenvector[v];
        CHECK(f.density[v] <= 1.0);
        CHECK(f.density_min[v] <= f.density_mean[v] + 1e-15);
        CHECK(f.density_mean[v] <= f.density_max[v] + 1e-15);
        CHECK(f.betweenness[v] >= 0.0);
        CHECK(f.pagerank[v] > 0.0);
        CHECK(f.pagerank[v] < 1.0);
    }
    CHECK(std::abs(pr - 1.0) <= 1e-9);
    CHECK(std::abs(std::sqrt(eig) - 1.0) <= 1e-9);

    SUBCASE("csv round trip") {
        TempDir dir("manual");
        write_manual_features_csv(dir.path() / "m.csv", ds.graph, f);
        const auto back = read_manual_features_csv(dir.path() / "m.csv", ds.graph);
        CHECK(back.as_matrix() == m);
    }
}
