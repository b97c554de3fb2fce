#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "routelab/env.hpp"

using namespace routelab;

namespace {

Graph make_graph(int n, int d, std::vector<Edge> edges) {
    Graph g;
    g.node_count = n;
    g.degree = d;
    g.positions.assign(n, {0.0, 0.0});
    std::sort(edges.begin(), edges.end(),
              [](const Edge& a, const Edge& b) { return std::pair(a.u, a.v) < std::pair(b.u, b.v); });
    g.edges = std::move(edges);
    g.rebuild_adjacency();
    g.validate();
    return g;
}

std::shared_ptr<const Graph> k4(int delay = 1) {
    return std::make_shared<const Graph>(make_graph(
        4, 3, {{0, 1, delay}, {0, 2, delay}, {0, 3, delay}, {1, 2, delay}, {1, 3, delay}, {2, 3, delay}}));
}

std::shared_ptr<const Graph> ring4(int d01, int d12, int d23, int d03) {
    return std::make_shared<const Graph>(
        make_graph(4, 2, {{0, 1, d01}, {1, 2, d12}, {2, 3, d23}, {0, 3, d03}}));
}

std::shared_ptr<const Graph> gen20(uint64_t seed) {
    std::mt19937_64 rng(seed);
    return std::make_shared<const Graph>(generate_graph(GenParams{}, rng));
}

std::vector<int> random_actions(const Graph& g, int n, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, g.degree);
    std::vector<int> a(n);
    for (int& x : a) x = pick(rng);
    return a;
}

void place(Packet& p, int node, int dst, double size) {
    p.node = node;
    p.src = node;
    p.dst = dst;
    p.size = size;
    p.in_transit = false;
    p.edge_index = -1;
    p.steps_remaining = 0;
    p.path_delay = 0;
    p.visited = {node};
}

}  // namespace

TEST_CASE("reset spawns N live at-node packets with zero loads") {
    EnvConfig cfg;
    RoutingEnv env(gen20(1), cfg, 99);
    const EnvState& s = env.state();
    REQUIRE(s.packets.size() == 20);
    for (const Packet& p : s.packets) {
        CHECK(!p.in_transit);
        CHECK(p.src != p.dst);
        CHECK(p.size >= 0.0);
        CHECK(p.size < 1.0);
        CHECK(p.node == p.src);
        REQUIRE(p.visited.size() == 1);
        CHECK(p.visited[0] == p.src);
        CHECK(p.birth_step == 0);
    }
    for (double l : s.edge_load) CHECK(l == 0.0);
    CHECK(s.step == 0);
}

TEST_CASE("reset determinism across instances") {
    EnvConfig cfg;
    RoutingEnv a(gen20(1), cfg, 7), b(gen20(1), cfg, 7), c(gen20(1), cfg, 8);
    bool same = true, diff = false;
    for (int i = 0; i < 20; ++i) {
        same = same && a.state().packets[i].src == b.state().packets[i].src &&
               a.state().packets[i].dst == b.state().packets[i].dst &&
               a.state().packets[i].size == b.state().packets[i].size;
        diff = diff || a.state().packets[i].src != c.state().packets[i].src ||
               a.state().packets[i].size != c.state().packets[i].size;
    }
    CHECK(same);
    CHECK(diff);
}

TEST_CASE("generator source draws a fresh graph per reset, deterministically") {
    GenParams gp;
    auto source = [gp](std::mt19937_64& rng) {
        return std::make_shared<const Graph>(generate_graph(gp, rng));
    };
    EnvConfig cfg;
    cfg.episode_len = 5;
    RoutingEnv env(source, cfg, 123), env2(source, cfg, 123);
    const std::string g0 = graph_to_json(env.graph());
    env.reset();
    const std::string g1 = graph_to_json(env.graph());
    CHECK(g0 != g1);
    CHECK(graph_to_json(env2.graph()) == g0);
    env2.reset();
    CHECK(graph_to_json(env2.graph()) == g1);
}

TEST_CASE("limited-mode transmission rule at the boundary") {
    EnvConfig cfg;
    cfg.packet_count = 3;
    cfg.mode = EnvMode::Limited;
    cfg.episode_len = 10;
    RoutingEnv env(k4(5), cfg, 1);
    auto& s = env.mutable_state();

    SUBCASE("load 0.5 then size 0.4 transmits") {
        place(s.packets[0], 0, 3, 0.5);
        place(s.packets[1], 0, 3, 0.4);
        place(s.packets[2], 2, 3, 0.1);
        const StepResult r = env.step({1, 1, 0});  // both toward node 1
        CHECK(r.rewards[0] == 0.0);
        CHECK(r.rewards[1] == 0.0);
        CHECK(s.packets[1].in_transit);
        const int e01 = env.graph().edge_between(0, 1);
        CHECK(s.edge_load[e01] == doctest::Approx(0.9));
        CHECK(s.blocks == 0);
    }
    SUBCASE("load 0.5 then size 0.6 blocks with -0.2") {
        place(s.packets[0], 0, 3, 0.5);
        place(s.packets[1], 0, 3, 0.6);
        place(s.packets[2], 2, 3, 0.1);
        const StepResult r = env.step({1, 1, 0});
        CHECK(r.rewards[0] == 0.0);
        CHECK(r.rewards[1] == -0.2);
        CHECK(!s.packets[1].in_transit);
        CHECK(s.packets[1].node == 0);
        CHECK(s.blocks == 1);
        // unlimited mode admits the same packet
        EnvConfig u = cfg;
        u.mode = EnvMode::Unlimited;
        RoutingEnv env2(k4(5), u, 1);
        place(env2.mutable_state().packets[0], 0, 3, 0.5);
        place(env2.mutable_state().packets[1], 0, 3, 0.6);
        place(env2.mutable_state().packets[2], 2, 3, 0.1);
        const StepResult r2 = env2.step({1, 1, 0});
        CHECK(r2.rewards[1] == 0.0);
        CHECK(env2.state().packets[1].in_transit);
    }
}

TEST_CASE("transit takes exactly the edge delay; arrival pays, respawns next step") {
    EnvConfig cfg;
    cfg.packet_count = 1;
    cfg.episode_len = 20;
    RoutingEnv env(k4(3), cfg, 5);
    auto& s = env.mutable_state();
    place(s.packets[0], 0, 1, 0.25);
    s.packets[0].birth_step = 0;
    s.step = 0;

    StepResult r = env.step({1});  // adjacency[0][0] leads to node 1
    CHECK(s.packets[0].in_transit);
    CHECK(s.packets[0].node == 1);  // observed position is the edge head
    CHECK(s.packets[0].steps_remaining == 3);
    r = env.step({2});  // ignored while in transit
    CHECK(s.packets[0].steps_remaining == 2);
    CHECK(r.arrived[0] == 0);
    r = env.step({0});
    CHECK(s.packets[0].steps_remaining == 1);
    r = env.step({0});  // third step after entering: arrival
    CHECK(r.arrived[0] == 1);
    CHECK(r.rewards[0] == 10.0);
    CHECK(r.arrival_age[0] == 3);
    CHECK(r.arrival_path_delay[0] == 3);
    CHECK(env.state().arrivals == 1);
    // slot respawned, first acts at the next step
    const Packet& fresh = env.state().packets[0];
    CHECK(!fresh.in_transit);
    CHECK(fresh.visited.size() == 1);
    CHECK(fresh.birth_step == env.state().step);
    const int e01 = env.graph().edge_between(0, 1);
    CHECK(env.state().edge_load[e01] == 0.0);
}

TEST_CASE("invariants and exact reward accounting under random play") {
    for (const EnvMode mode : {EnvMode::Unlimited, EnvMode::Limited}) {
        EnvConfig cfg;
        cfg.packet_count = 8;
        cfg.mode = mode;
        cfg.episode_len = 60;
        RoutingEnv env(gen20(2), cfg, 11);
        std::mt19937_64 act_rng(17);
        // per-slot transit tracking: entry step and promised delay
        std::vector<int> entry_step(cfg.packet_count, -1), promised(cfg.packet_count, 0);
        for (int ep = 0; ep < 6; ++ep) {
            env.reset();
            std::fill(entry_step.begin(), entry_step.end(), -1);
            long long tally5 = 0;  // rewards scaled by 5 are exact small integers
            for (int t = 0; t < cfg.episode_len; ++t) {
                std::vector<char> was_transit(cfg.packet_count);
                for (int i = 0; i < cfg.packet_count; ++i)
                    was_transit[i] = env.state().packets[i].in_transit;
                const StepResult r = env.step(random_actions(env.graph(), cfg.packet_count, act_rng));
                REQUIRE(env.state().packets.size() == static_cast<size_t>(cfg.packet_count));
                for (int i = 0; i < cfg.packet_count; ++i) {
                    const double rw = r.rewards[i];
                    CHECK((rw == 0.0 || rw == 10.0 || rw == -0.2));
                    tally5 += llround(5.0 * rw);
                    const Packet& p = env.state().packets[i];
                    if (!was_transit[i] && p.in_transit) {
                        entry_step[i] = t;
                        promised[i] = p.steps_remaining;
                        CHECK(promised[i] == env.state().edge_delay[p.edge_index]);
                    } else if (was_transit[i] && !p.in_transit) {
                        CHECK(t - entry_step[i] == promised[i]);
                    }
                }
                // edge loads equal the sum of in-transit sizes
                std::vector<double> want(env.graph().edges.size(), 0.0);
                for (const Packet& p : env.state().packets)
                    if (p.in_transit) want[p.edge_index] += p.size;
                for (size_t e = 0; e < want.size(); ++e) {
                    CHECK(std::abs(env.state().edge_load[e] - want[e]) < 1e-9);
                    if (mode == EnvMode::Limited) CHECK(env.state().edge_load[e] < 1.0);
                }
            }
            CHECK(tally5 == 50 * env.state().arrivals - env.state().blocks);
            // same identity on the accumulated double total
            CHECK(env.state().reward_total ==
                  doctest::Approx(10.0 * env.state().arrivals - 0.2 * env.state().blocks)
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("arrived packets skip acting on their arrival step") {
    // the arriving packet's action points at a real edge but must be ignored
    EnvConfig cfg;
    cfg.packet_count = 1;
    cfg.episode_len = 10;
    RoutingEnv env(k4(1), cfg, 3);
    place(env.mutable_state().packets[0], 0, 2, 0.5);
    env.step({2});  // toward node 2, delay 1
    const StepResult r = env.step({3});  // would move somewhere else if applied
    CHECK(r.arrived[0] == 1);
    CHECK(env.state().arrivals == 1);
}

TEST_CASE("out-of-range actions and bad step calls throw") {
    EnvConfig cfg;
    cfg.packet_count = 2;
    cfg.episode_len = 1;
    RoutingEnv env(k4(1), cfg, 1);
    CHECK_THROWS_AS(env.step({4, 0}), std::out_of_range);
    CHECK_THROWS_AS(env.step({-1, 0}), std::out_of_range);
    CHECK_THROWS_AS(env.step({0}), std::invalid_argument);
    env.step({0, 0});
    CHECK_THROWS_AS(env.step({0, 0}), std::logic_error);  // episode over
}

TEST_CASE("observation layout, scaling and one-hot structure") {
    EnvConfig cfg;
    cfg.packet_count = 6;
    cfg.episode_len = 40;
    auto g = gen20(4);
    RoutingEnv env(g, cfg, 21);
    std::mt19937_64 act_rng(9);
    const int L = g->node_count, D = g->degree;
    REQUIRE(RoutingEnv::agent_obs_dim(*g) == 2 * L + 1 + D * (L + 2));
    REQUIRE(RoutingEnv::node_obs_dim(*g) == L + 2 + D * (L + 2));
    for (int t = 0; t < 30; ++t) {
        const EnvState& s = env.state();
        for (int slot = 0; slot < cfg.packet_count; ++slot) {
            const auto o = RoutingEnv::agent_obs(s, cfg, slot);
            REQUIRE(static_cast<int>(o.size()) == 2 * L + 1 + D * (L + 2));
            const Packet& p = s.packets[slot];
            float cur = 0, dst = 0;
            for (int v = 0; v < L; ++v) {
                cur += o[v];
                dst += o[L + v];
            }
            CHECK(cur == 1.0f);
            CHECK(dst == 1.0f);
            CHECK(o[p.node] == 1.0f);
            CHECK(o[L + p.dst] == 1.0f);
            CHECK(o[2 * L] == static_cast<float>(p.size));
            for (int k = 0; k < D; ++k) {
                const int base = 2 * L + 1 + k * (L + 2);
                const auto [w, e] = g->adjacency[p.node][k];
                CHECK(o[base] == static_cast<float>(s.edge_delay[e] / 10.0));
                CHECK(o[base + 1] == static_cast<float>(s.edge_load[e]));
                float onehot = 0;
                for (int v = 0; v < L; ++v) onehot += o[base + 2 + v];
                CHECK(onehot == 1.0f);
                CHECK(o[base + 2 + w] == 1.0f);
            }
        }
        for (int node = 0; node < L; ++node) {
            const auto m = RoutingEnv::node_obs(s, cfg, node);
            REQUIRE(static_cast<int>(m.size()) == L + 2 + D * (L + 2));
            CHECK(m[node] == 1.0f);
            int count = 0;
            double total = 0;
            for (const Packet& p : s.packets)
                if (!p.in_transit && p.node == node) {
                    ++count;
                    total += p.size;
                }
            CHECK(m[L] == static_cast<float>(count / 6.0));
            CHECK(m[L + 1] == static_cast<float>(total / 6.0));
        }
        const auto nodes = RoutingEnv::assignment(s);
        for (int slot = 0; slot < cfg.packet_count; ++slot)
            CHECK(nodes[slot] == s.packets[slot].node);
        env.step(random_actions(*g, cfg.packet_count, act_rng));
    }
}

TEST_CASE("in-transit agents observe the head node's surroundings") {
    EnvConfig cfg;
    cfg.packet_count = 1;
    cfg.episode_len = 10;
    auto g = k4(4);
    RoutingEnv env(g, cfg, 2);
    place(env.mutable_state().packets[0], 0, 3, 0.5);
    env.step({2});  // toward node 2, delay 4, stays in transit
    const auto o = RoutingEnv::agent_obs(env.state(), cfg, 0);
    CHECK(o[2] == 1.0f);  // position one-hot is the head
    // first edge block describes node 2's first outgoing edge (to node 0)
    const int L = 4, base = 2 * L + 1;
    CHECK(o[base + 2 + 0] == 1.0f);
}

TEST_CASE("delay override applies from its step and spares in-flight packets") {
    EnvConfig cfg;
    cfg.packet_count = 1;
    cfg.episode_len = 30;
    auto g = ring4(2, 2, 2, 5);
    RoutingEnv env(g, cfg, 8);
    const int e01 = g->edge_between(0, 1);
    env.schedule_delay_override({e01, 20, 5});
    auto& s = env.mutable_state();
    place(s.packets[0], 0, 1, 0.5);

    for (int t = 0; t < 4; ++t) {
        CHECK(env.state().edge_delay[e01] == 2);
        env.step({0});
    }
    // fifth step: packet enters edge 0-1 while the old delay is in force
    env.step({1});
    CHECK(env.state().edge_delay[e01] == 20);  // override live from step 5 on
    CHECK(env.state().packets[0].steps_remaining == 2);
    env.step({0});
    const StepResult r = env.step({0});
    CHECK(r.arrived[0] == 1);  // old timer honored despite the override
    CHECK(r.arrival_path_delay[0] == 2);
}

TEST_CASE("override validation and identity override") {
    EnvConfig cfg;
    cfg.packet_count = 2;
    cfg.episode_len = 15;
    auto g = gen20(6);
    RoutingEnv env(g, cfg, 31);
    CHECK_THROWS_AS(env.schedule_delay_override({-1, 3, 0}), std::invalid_argument);
    CHECK_THROWS_AS(env.schedule_delay_override({999, 3, 0}), std::invalid_argument);
    CHECK_THROWS_AS(env.schedule_delay_override({0, 0, 0}), std::invalid_argument);

    // overriding an edge to its existing delay leaves the trace unchanged
    RoutingEnv a(g, cfg, 55), b(g, cfg, 55);
    b.schedule_delay_override({3, g->edges[3].delay, 4});
    std::mt19937_64 ra(2), rb(2);
    for (int t = 0; t < cfg.episode_len; ++t) {
        const auto acts = random_actions(*g, cfg.packet_count, ra);
        const auto acts2 = random_actions(*g, cfg.packet_count, rb);
        const StepResult x = a.step(acts), y = b.step(acts2);
        for (int i = 0; i < cfg.packet_count; ++i) CHECK(x.rewards[i] == y.rewards[i]);
    }
    CHECK(a.state().arrivals == b.state().arrivals);
}

TEST_CASE("shortest-path policy walks optimal routes in unlimited mode") {
    for (uint64_t seed : {10ULL, 11ULL, 12ULL}) {
        auto g = gen20(seed);
        const auto apsp = all_pairs_shortest_paths(*g, PathWeight::Delay);
        EnvConfig cfg;
        cfg.episode_len = 120;
        RoutingEnv env(g, cfg, seed * 3 + 1);
        ShortestPathPolicy sp(SpVariant::Static);
        sp.on_reset(env.state());
        long long arrivals = 0;
        for (int t = 0; t < cfg.episode_len; ++t) {
            std::vector<std::pair<int, int>> od(cfg.packet_count);
            for (int i = 0; i < cfg.packet_count; ++i)
                od[i] = {env.state().packets[i].visited.front(), env.state().packets[i].dst};
            const StepResult r = env.step(sp.actions(env.state()));
            for (int i = 0; i < cfg.packet_count; ++i)
                if (r.arrived[i]) {
                    ++arrivals;
                    CHECK(r.arrival_path_delay[i] == apsp[od[i].first][od[i].second]);
                }
        }
        CHECK(arrivals > 50);  // plenty of arrivals feed the check
    }
}

TEST_CASE("static SP keeps its route after an override, stepwise reroutes") {
    auto g = ring4(2, 2, 2, 5);
    EnvConfig cfg;
    cfg.packet_count = 1;
    cfg.episode_len = 30;
    RoutingEnv env(g, cfg, 14);
    const int e01 = g->edge_between(0, 1);
    env.schedule_delay_override({e01, 20, 5});
    place(env.mutable_state().packets[0], 0, 1, 0.5);
    ShortestPathPolicy st(SpVariant::Static), sw(SpVariant::Stepwise);
    st.on_reset(env.state());
    sw.on_reset(env.state());
    CHECK(st.actions(env.state()) == std::vector<int>{1});
    CHECK(sw.actions(env.state()) == std::vector<int>{1});
    for (int t = 0; t < 5; ++t) env.step({0});
    // direct edge now costs 20, the detour 0-3-2-1 costs 9
    CHECK(st.actions(env.state()) == std::vector<int>{1});
    CHECK(sw.actions(env.state()) == std::vector<int>{2});
}

TEST_CASE("unlimited mode dominates limited mode for SP play") {
    for (uint64_t seed : {3ULL, 4ULL, 5ULL}) {
        auto g = gen20(seed);
        long long arr[2];
        for (int m = 0; m < 2; ++m) {
            EnvConfig cfg;
            cfg.mode = m == 0 ? EnvMode::Unlimited : EnvMode::Limited;
            cfg.episode_len = 100;
            RoutingEnv env(g, cfg, 77 + seed);
            ShortestPathPolicy sp(SpVariant::Static);
            sp.on_reset(env.state());
            for (int t = 0; t < cfg.episode_len; ++t) env.step(sp.actions(env.state()));
            arr[m] = env.state().arrivals;
        }
        CHECK(arr[0] > arr[1]);
    }
}

TEST_CASE("action mask blocks visited nodes and raises the drop signal") {
    auto g = k4(1);
    EnvConfig cfg;
    cfg.packet_count = 1;
    cfg.episode_len = 10;
    RoutingEnv env(g, cfg, 1);
    auto& s = env.mutable_state();
    place(s.packets[0], 0, 3, 0.5);

    ActionMask fresh = RoutingEnv::action_mask(s, 0);
    CHECK(fresh.legal == std::vector<uint8_t>{1, 1, 1, 1});
    CHECK(!fresh.drop);

    s.packets[0].visited = {0, 1, 2};  // node 3 still open
    ActionMask partial = RoutingEnv::action_mask(s, 0);
    CHECK(partial.legal == std::vector<uint8_t>{1, 0, 0, 1});
    CHECK(!partial.drop);

    s.packets[0].visited = {0, 1, 2, 3};
    s.packets[0].node = 1;
    ActionMask dead = RoutingEnv::action_mask(s, 0);
    CHECK(dead.drop);
    CHECK(dead.legal[0] == 1);  // wait stays legal; the drop signal decides
}

TEST_CASE("masked rollouts never revisit a node and count drops") {
    auto g = gen20(9);
    EnvConfig cfg;
    cfg.packet_count = 10;
    cfg.episode_len = 80;
    RoutingEnv env(g, cfg, 40);
    std::mt19937_64 pick_rng(4);
    for (int ep = 0; ep < 5; ++ep) {
        env.reset();
        for (int t = 0; t < cfg.episode_len; ++t) {
            std::vector<uint8_t> drops(cfg.packet_count, 0);
            std::vector<int> acts(cfg.packet_count, 0);
            for (int i = 0; i < cfg.packet_count; ++i) {
                const ActionMask m = RoutingEnv::action_mask(env.state(), i);
                if (env.state().packets[i].in_transit) continue;
                if (m.drop) {
                    drops[i] = 1;
                    continue;
                }
                std::vector<int> legal;
                for (int a = 1; a <= g->degree; ++a)
                    if (m.legal[a]) legal.push_back(a);
                acts[i] = legal[pick_rng() % legal.size()];
            }
            env.step(acts, &drops);
            for (const Packet& p : env.state().packets) {
                std::set<int> uniq(p.visited.begin(), p.visited.end());
                CHECK(uniq.size() == p.visited.size());
            }
        }
        CHECK(env.state().drops > 0);  // forced moves must eventually corner packets
    }
}

TEST_CASE("masked episode runner returns a consistent trace") {
    auto g = gen20(13);
    EnvConfig cfg;
    cfg.packet_count = 8;
    cfg.episode_len = 60;
    RoutingEnv env(g, cfg, 50);
    std::mt19937_64 pick_rng(6);
    const EpisodeTrace tr = run_episode_masked(
        env,
        [&](const EnvState& st, const std::vector<ActionMask>& masks) {
            std::vector<int> acts(st.packets.size(), 0);
            for (size_t i = 0; i < st.packets.size(); ++i) {
                if (st.packets[i].in_transit || masks[i].drop) continue;
                std::vector<int> legal;
                for (size_t a = 1; a < masks[i].legal.size(); ++a)
                    if (masks[i].legal[a]) legal.push_back(static_cast<int>(a));
                if (!legal.empty()) acts[i] = legal[pick_rng() % legal.size()];
            }
            return acts;
        });
    CHECK(tr.steps == 60);
    CHECK(tr.arrivals == env.state().arrivals);
    CHECK(tr.drops == env.state().drops);
    const EpisodeMetrics m = episode_metrics(tr);
    CHECK(m.drops_per_step == doctest::Approx(tr.drops / 60.0));
}

TEST_CASE("episode metrics identities") {
    EpisodeTrace t;
    CHECK_THROWS_AS(episode_metrics(t), std::invalid_argument);

    t.steps = 50;
    t.packet_count = 4;
    t.arrivals = 10;
    t.blocks = 5;
    t.reward_total = 10.0 * 10 - 0.2 * 5;
    t.arrival_ages = {3, 5, 4};
    const EpisodeMetrics m = episode_metrics(t);
    CHECK(m.throughput == doctest::Approx(0.2));
    CHECK(m.mean_reward == doctest::Approx(99.0 / 200.0));
    REQUIRE(m.mean_delay.has_value());
    CHECK(*m.mean_delay == doctest::Approx(4.0));

    EpisodeTrace none;
    none.steps = 10;
    none.packet_count = 2;
    none.blocks = 6;
    none.reward_total = -0.2 * 6;
    CHECK(!episode_metrics(none).mean_delay.has_value());
    CHECK(episode_metrics(none).throughput == 0.0);
    CHECK(episode_metrics(none).mean_reward == doctest::Approx(-1.2 / 20.0));
}

TEST_CASE("per-step mean reward equals ten arrivals over N without blocks") {
    auto g = gen20(15);
    EnvConfig cfg;
    cfg.episode_len = 150;
    RoutingEnv env(g, cfg, 66);
    ShortestPathPolicy sp(SpVariant::Static);
    sp.on_reset(env.state());
    for (int t = 0; t < cfg.episode_len; ++t) env.step(sp.actions(env.state()));
    CHECK(env.state().blocks == 0);  // unlimited mode never blocks
    const double mean_reward = env.state().reward_total / (cfg.packet_count * cfg.episode_len);
    const double throughput = env.state().arrivals / static_cast<double>(cfg.episode_len);
    CHECK(mean_reward == doctest::Approx(10.0 * throughput / cfg.packet_count));
}

TEST_CASE("trace csv export") {
    EpisodeTrace t;
    t.steps = 2;
    t.packet_count = 1;
    t.rows = {{0, 0, 1, 0.0, 0, 0, 0}, {1, 0, 2, 10.0, 1, 0, 0}};
    std::ostringstream out;
    write_trace_csv(t, out);
    CHECK(out.str() ==
          "step,agent,action,reward,arrivals,blocks,drops\n"
          "0,0,1,0,0,0,0\n"
          "1,0,2,10,1,0,0\n");
}
