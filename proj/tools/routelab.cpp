// Experiment driver: graph suites, shortest-path baselines, supervised
// refinement, DQN training and evaluation, and the delay-adaptation study.
// Every subcommand writes the resolved configuration next to its outputs so a
// run can be reproduced from the directory alone.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "routelab/marl_dqn.hpp"
#include "routelab/sp_regression.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace routelab;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path make_out_dir(const std::string& out) {
    if (out.empty()) throw std::runtime_error("--out is required");
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

void write_config(const fs::path& dir, const json& cfg) {
    write_text(dir / "config.json", cfg.dump(2) + "\n");
}

EnvMode parse_mode(const std::string& mode) {
    return mode == "limited" ? EnvMode::Limited : EnvMode::Unlimited;
}

// Suite layout written by gen-graphs: graph_0000.json, graph_0001.json, ...
std::vector<fs::path> suite_graph_files(const std::string& dir, int limit) {
    if (!fs::is_directory(dir)) throw std::runtime_error("graph suite not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.rfind("graph_", 0) == 0 &&
            entry.path().extension() == ".json")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no graph_*.json files in " + dir);
    if (limit > 0 && static_cast<int>(files.size()) > limit) files.resize(limit);
    return files;
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

struct GenArgs {
    int graphs = 1000;
    int nodes = 20;
    int degree = 3;
    double delay_scale = 7.0;
    uint64_t seed = 0;
    std::string out;
};

int cmd_gen_graphs(const GenArgs& a) {
    if ((static_cast<long long>(a.nodes) * a.degree) % 2 != 0) {
        std::cerr << "gen-graphs: nodes * degree must be even\n";
        return 1;
    }
    const fs::path dir = make_out_dir(a.out);
    GenParams gp;
    gp.node_count = a.nodes;
    gp.degree = a.degree;
    gp.delay_scale = a.delay_scale;
    std::mt19937_64 rng(a.seed);
    std::vector<Graph> suite;
    suite.reserve(a.graphs);
    for (int i = 0; i < a.graphs; ++i) {
        suite.push_back(generate_graph(gp, rng));
        char name[32];
        std::snprintf(name, sizeof(name), "graph_%04d.json", i);
        save_graph(suite.back(), (dir / name).string());
    }
    const SuiteStats stats = suite_stats(suite);
    write_text(dir / "stats.json", suite_stats_to_json(stats) + "\n");
    write_config(dir, json{{"command", "gen-graphs"},
                           {"graphs", a.graphs},
                           {"nodes", a.nodes},
                           {"degree", a.degree},
                           {"delay_scale", a.delay_scale},
                           {"seed", a.seed},
                           {"out", a.out}});
    std::cout << "wrote " << a.graphs << " graphs to " << dir.string()
              << " (mean hop diameter " << stats.diameter_hops.mean << ", mean pair hops "
              << stats.apsp_hops.mean << ")\n";
    return 0;
}

struct BaselineArgs {
    std::string suite;
    int graphs = 0;  // 0 = whole suite
    int episodes = 100;
    int episode_len = 300;
    int packets = 20;
    uint64_t seed = 0;
    std::string out;
};

int cmd_baseline_sp(const BaselineArgs& a) {
    const fs::path dir = make_out_dir(a.out);
    const auto files = suite_graph_files(a.suite, a.graphs);
    std::ostringstream csv;
    csv << std::setprecision(10)
        << "graph,throughput_unlimited,throughput_limited,max_betweenness\n";
    std::vector<double> thr_u, thr_l;
    for (size_t i = 0; i < files.size(); ++i) {
        const auto g = std::make_shared<Graph>(load_graph(files[i].string()));
        marl::EvalConfig cfg;
        cfg.episodes = a.episodes;
        cfg.episode_len = a.episode_len;
        cfg.packet_count = a.packets;
        cfg.mode = EnvMode::Unlimited;
        const marl::EvalResult ru = marl::evaluate_sp(SpVariant::Static, g, cfg, a.seed);
        cfg.mode = EnvMode::Limited;
        const marl::EvalResult rl = marl::evaluate_sp(SpVariant::Static, g, cfg, a.seed);
        const auto bc = betweenness_centrality(*g);
        const double bc_max = *std::max_element(bc.begin(), bc.end());
        csv << files[i].filename().string() << ',' << ru.throughput << ',' << rl.throughput
            << ',' << bc_max << '\n';
        thr_u.push_back(ru.throughput);
        thr_l.push_back(rl.throughput);
    }
    write_text(dir / "baseline_sp.csv", csv.str());
    write_text(dir / "summary.json",
               json{{"graphs", files.size()},
                    {"throughput_unlimited_mean", mean_of(thr_u)},
                    {"throughput_limited_mean", mean_of(thr_l)}}
                       .dump(2) +
                   "\n");
    write_config(dir, json{{"command", "baseline-sp"},
                           {"suite", a.suite},
                           {"graphs", a.graphs},
                           {"episodes", a.episodes},
                           {"episode_len", a.episode_len},
                           {"packets", a.packets},
                           {"seed", a.seed},
                           {"out", a.out}});
    std::cout << "baseline over " << files.size() << " graphs: throughput "
              << mean_of(thr_u) << " unlimited, " << mean_of(thr_l) << " limited\n";
    return 0;
}

void write_sl_eval_csv(const fs::path& path, const std::map<int, double>& mse,
                       double scale) {
    std::ostringstream csv;
    csv << std::setprecision(10) << "t,mse_scaled,mse_raw\n";
    for (const auto& [t, v] : mse) csv << t << ',' << v << ',' << v * scale * scale << '\n';
    write_text(path, csv.str());
}

const std::vector<int> kSlEvalSteps = {1, 2, 4, 8, 16, 32};

struct TrainSlArgs {
    int graphs = 10500;
    int validation = 500;
    int k = 1;
    int unroll = 8;
    int steps = 5000;
    int batch = 32;
    int nodes = 20;
    int degree = 3;
    bool hops = false;
    std::string dataset;
    uint64_t seed = 0;
    std::string out;
};

int cmd_train_sl(const TrainSlArgs& a) {
    const fs::path dir = make_out_dir(a.out);
    spreg::SlConfig sl;
    sl.k = a.k;
    sl.unroll = a.unroll;
    sl.iterations = a.steps;
    sl.batch = a.batch;
    spreg::Dataset data;
    if (!a.dataset.empty()) {
        data = spreg::load_dataset(a.dataset);
    } else {
        spreg::DatasetConfig dc;
        dc.count = a.graphs;
        dc.validation = a.validation;
        dc.gen.node_count = a.nodes;
        dc.gen.degree = a.degree;
        dc.hop_targets = a.hops;
        std::cout << "building dataset of " << dc.count << " graphs...\n";
        data = spreg::build_dataset(dc, a.seed);
    }
    const auto& first = data.samples.front();
    spreg::SlModel model(sl, static_cast<int>(first.node_obs.cols()), first.graph.degree,
                         first.graph.node_count, a.seed);
    const spreg::SlTrainResult result = spreg::train_regression(model, data, sl, a.seed + 1);
    {
        std::ofstream loss(dir / "loss.csv");
        spreg::write_loss_csv(result.curve, loss);
    }
    spreg::save_sl_model((dir / "model.bin").string(), model, sl);
    const std::vector<spreg::RegressionSample> val(data.samples.end() - data.validation,
                                                   data.samples.end());
    const auto mse = spreg::evaluate_at_steps(model, val, kSlEvalSteps);
    write_sl_eval_csv(dir / "eval.csv", mse, model.target_scale);
    write_config(dir, json{{"command", "train-sl"},
                           {"graphs", a.graphs},
                           {"validation", a.validation},
                           {"k", a.k},
                           {"unroll", a.unroll},
                           {"steps", a.steps},
                           {"batch", a.batch},
                           {"nodes", a.nodes},
                           {"degree", a.degree},
                           {"hops", a.hops},
                           {"dataset", a.dataset},
                           {"seed", a.seed},
                           {"out", a.out}});
    std::cout << "validation loss " << result.initial_val_loss << " -> "
              << result.final_val_loss << " (scaled units); per-step MSE written to eval.csv\n";
    return 0;
}

struct EvalSlArgs {
    std::string model;
    int graphs = 500;
    uint64_t seed = 0;
    std::string out;
};

int cmd_eval_sl(const EvalSlArgs& a) {
    const fs::path dir = make_out_dir(a.out);
    spreg::SlModel model = spreg::load_sl_model(a.model);
    const int degree = model.head.in_features() / model.obs_cfg.hidden_dim - 1;
    spreg::DatasetConfig dc;
    dc.count = a.graphs;
    dc.validation = 0;
    dc.gen.node_count = model.node_count();
    dc.gen.degree = degree;
    dc.hop_targets = model.hop_targets;
    const spreg::Dataset data = spreg::build_dataset(dc, a.seed);
    const auto mse = spreg::evaluate_at_steps(model, data.samples, kSlEvalSteps);
    write_sl_eval_csv(dir / "eval.csv", mse, model.target_scale);
    write_config(dir, json{{"command", "eval-sl"},
                           {"model", a.model},
                           {"graphs", a.graphs},
                           {"seed", a.seed},
                           {"out", a.out}});
    for (const auto& [t, v] : mse)
        std::cout << "t=" << t << "  mse=" << v << " (scaled)  "
                  << v * model.target_scale * model.target_scale << " (raw)\n";
    return 0;
}

struct TrainRlArgs {
    std::string graph_file;  // fixed-graph run; empty = random graphs per episode
    std::string mode;        // empty = preset default
    long long steps = -1;
    int packets = -1;
    int nodes = 20;
    int degree = 3;
    std::string config_file;
    uint64_t seed = 0;
    std::string out;
};

int cmd_train_rl(const TrainRlArgs& a) {
    const fs::path dir = make_out_dir(a.out);
    const bool single = !a.graph_file.empty();
    marl::TrainConfig cfg = single ? marl::single_graph_defaults() : marl::generalized_defaults();
    if (!a.mode.empty()) cfg.mode = parse_mode(a.mode);
    if (a.steps >= 0) cfg.total_steps = a.steps;
    if (a.packets > 0) cfg.packet_count = a.packets;
    if (!a.config_file.empty())
        cfg = marl::train_config_from_json(read_text(a.config_file), cfg);

    EnvConfig ec;
    ec.packet_count = cfg.packet_count;
    ec.mode = cfg.mode;
    ec.episode_len = cfg.episode_len;
    std::unique_ptr<RoutingEnv> env;
    if (single) {
        env = std::make_unique<RoutingEnv>(
            std::make_shared<Graph>(load_graph(a.graph_file)), ec, a.seed);
    } else {
        GenParams gp;
        gp.node_count = a.nodes;
        gp.degree = a.degree;
        env = std::make_unique<RoutingEnv>(
            [gp](std::mt19937_64& rng) {
                return std::make_shared<const Graph>(generate_graph(gp, rng));
            },
            ec, a.seed);
    }
    const Graph& g = env->graph();
    marl::RlModel model(cfg, RoutingEnv::agent_obs_dim(g), RoutingEnv::node_obs_dim(g),
                        g.degree, a.seed);
    std::cout << (single ? "single-graph" : "generalized") << " training: "
              << cfg.total_steps << " steps, " << (cfg.with_graph_obs ? "graph-obs" : "plain")
              << " q-network\n";
    const marl::TrainResult result = marl::train(model, *env, cfg, a.seed);

    marl::save_rl_model((dir / "model.bin").string(), model, cfg);
    {
        std::ofstream csv(dir / "training.csv");
        marl::write_training_csv(result, csv);
    }
    {
        std::ostringstream csv;
        csv << std::setprecision(10) << "step,loss\n";
        for (const auto& [step, loss] : result.losses) csv << step << ',' << loss << '\n';
        write_text(dir / "losses.csv", csv.str());
    }
    json rc = json::parse(marl::train_config_to_json(cfg));
    write_config(dir, json{{"command", "train-rl"},
                           {"graph", a.graph_file},
                           {"nodes", a.nodes},
                           {"degree", a.degree},
                           {"seed", a.seed},
                           {"out", a.out},
                           {"train_config", rc}});
    double tail = 0.0;
    const size_t n = result.episodes.size();
    const size_t win = std::min<size_t>(n, 100);
    for (size_t i = n - win; i < n; ++i) tail += result.episodes[i].mean_reward;
    if (win > 0) tail /= static_cast<double>(win);
    std::cout << n << " episodes; mean reward over last " << win << ": " << tail << "\n";
    return 0;
}

struct EvalRlArgs {
    std::vector<std::string> models;
    std::string suite;
    std::string graph_file;
    int graphs = 0;
    std::string mode = "unlimited";
    bool mask = false;
    int episodes = 10;
    int episode_len = 300;
    int packets = 20;
    uint64_t seed = 0;
    std::string out;
};

int cmd_eval_rl(const EvalRlArgs& a) {
    const fs::path dir = make_out_dir(a.out);
    std::vector<fs::path> files;
    if (!a.graph_file.empty())
        files.push_back(a.graph_file);
    else
        files = suite_graph_files(a.suite, a.graphs);

    marl::EvalConfig cfg;
    cfg.episodes = a.episodes;
    cfg.episode_len = a.episode_len;
    cfg.packet_count = a.packets;
    cfg.mode = parse_mode(a.mode);
    cfg.masked = a.mask;

    std::vector<std::shared_ptr<const Graph>> graphs;
    for (const auto& f : files)
        graphs.push_back(std::make_shared<Graph>(load_graph(f.string())));

    std::ostringstream csv;
    csv << std::setprecision(10)
        << "model,graph,reward,delay,throughput,drops_per_step,sp_throughput\n";
    std::vector<double> sp_thr(graphs.size());
    std::vector<double> sp_delay(graphs.size());
    for (size_t gi = 0; gi < graphs.size(); ++gi) {
        marl::EvalConfig sp_cfg = cfg;
        sp_cfg.masked = false;
        const marl::EvalResult r = marl::evaluate_sp(SpVariant::Static, graphs[gi], sp_cfg, a.seed);
        sp_thr[gi] = r.throughput;
        sp_delay[gi] = r.mean_delay.value_or(-1.0);
    }
    std::vector<double> m_reward, m_delay, m_thr, m_drops;
    for (const auto& mf : a.models) {
        const marl::RlModel model = marl::load_rl_model(mf);
        std::vector<double> rewards, delays, thrs, drops;
        for (size_t gi = 0; gi < graphs.size(); ++gi) {
            const marl::EvalResult r = marl::evaluate_model(model, graphs[gi], cfg, a.seed);
            csv << fs::path(mf).filename().string() << ','
                << files[gi].filename().string() << ',' << r.mean_reward << ','
                << r.mean_delay.value_or(-1.0) << ',' << r.throughput << ','
                << r.drops_per_step << ',' << sp_thr[gi] << '\n';
            rewards.push_back(r.mean_reward);
            if (r.mean_delay) delays.push_back(*r.mean_delay);
            thrs.push_back(r.throughput);
            drops.push_back(r.drops_per_step);
        }
        m_reward.push_back(mean_of(rewards));
        m_delay.push_back(mean_of(delays));
        m_thr.push_back(mean_of(thrs));
        m_drops.push_back(mean_of(drops));
    }
    write_text(dir / "eval.csv", csv.str());
    write_text(dir / "summary.json",
               json{{"models", a.models.size()},
                    {"graphs", graphs.size()},
                    {"reward_mean", mean_of(m_reward)},
                    {"reward_std", std_of(m_reward)},
                    {"delay_mean", mean_of(m_delay)},
                    {"delay_std", std_of(m_delay)},
                    {"throughput_mean", mean_of(m_thr)},
                    {"throughput_std", std_of(m_thr)},
                    {"drops_per_step_mean", mean_of(m_drops)},
                    {"sp_throughput_mean", mean_of(sp_thr)},
                    {"sp_delay_mean", mean_of(sp_delay)}}
                       .dump(2) +
                   "\n");
    write_config(dir, json{{"command", "eval-rl"},
                           {"models", a.models},
                           {"suite", a.suite},
                           {"graph", a.graph_file},
                           {"graphs", a.graphs},
                           {"mode", a.mode},
                           {"mask", a.mask},
                           {"episodes", a.episodes},
                           {"episode_len", a.episode_len},
                           {"packets", a.packets},
                           {"seed", a.seed},
                           {"out", a.out}});
    std::cout << "throughput " << mean_of(m_thr) << " +- " << std_of(m_thr) << " vs sp "
              << mean_of(sp_thr) << " over " << graphs.size() << " graphs\n";
    return 0;
}

struct AdaptArgs {
    std::string model;
    std::string graph_file;
    int episodes = 100;
    int episode_len = 300;
    int packets = 20;
    std::string mode = "limited";
    int edge = -1;
    int new_delay = 10;
    int change_step = 50;
    bool control = false;
    uint64_t seed = 0;
    std::string out;
};

int cmd_adapt(const AdaptArgs& a) {
    const fs::path dir = make_out_dir(a.out);
    const marl::RlModel model = marl::load_rl_model(a.model);
    const auto g = std::make_shared<Graph>(load_graph(a.graph_file));
    marl::AdaptationConfig cfg;
    cfg.episodes = a.episodes;
    cfg.episode_len = a.episode_len;
    cfg.packet_count = a.packets;
    cfg.mode = parse_mode(a.mode);
    cfg.edge_index = a.edge;
    cfg.new_delay = a.new_delay;
    cfg.change_step = a.change_step;
    cfg.with_override = !a.control;
    const marl::AdaptationResult res = marl::adaptation_experiment(model, g, cfg, a.seed);
    {
        std::ofstream csv(dir / "adapt.csv");
        csv << std::setprecision(10);
        marl::write_adaptation_csv(res, csv);
    }
    write_text(dir / "summary.json",
               json{{"edge_index", res.edge_index},
                    {"old_delay", res.old_delay},
                    {"new_delay", a.new_delay},
                    {"change_step", a.change_step},
                    {"control", a.control}}
                       .dump(2) +
                   "\n");
    write_config(dir, json{{"command", "adapt"},
                           {"model", a.model},
                           {"graph", a.graph_file},
                           {"episodes", a.episodes},
                           {"episode_len", a.episode_len},
                           {"packets", a.packets},
                           {"mode", a.mode},
                           {"edge", a.edge},
                           {"new_delay", a.new_delay},
                           {"change_step", a.change_step},
                           {"control", a.control},
                           {"seed", a.seed},
                           {"out", a.out}});
    std::cout << "edge " << res.edge_index << " (delay " << res.old_delay << " -> "
              << a.new_delay << " at step " << a.change_step << "), series in adapt.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"packet-routing laboratory experiment driver"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* cgen = app.add_subcommand("gen-graphs", "generate a random regular graph suite");
    cgen->add_option("--graphs", gen.graphs, "number of graphs");
    cgen->add_option("--nodes", gen.nodes, "nodes per graph");
    cgen->add_option("--degree", gen.degree, "degree of every node");
    cgen->add_option("--delay-scale", gen.delay_scale, "delay per unit distance");
    cgen->add_option("--seed", gen.seed, "generator seed");
    cgen->add_option("--out", gen.out, "output directory")->required();

    BaselineArgs base;
    auto* cbase = app.add_subcommand("baseline-sp", "shortest-path heuristic over a suite");
    cbase->add_option("--suite", base.suite, "graph suite directory")->required();
    cbase->add_option("--graphs", base.graphs, "cap on suite size (0 = all)");
    cbase->add_option("--episodes", base.episodes, "episodes per graph and mode");
    cbase->add_option("--episode-len", base.episode_len, "steps per episode");
    cbase->add_option("--packets", base.packets, "packets in flight");
    cbase->add_option("--seed", base.seed, "environment seed");
    cbase->add_option("--out", base.out, "output directory")->required();

    TrainSlArgs tsl;
    auto* ctsl = app.add_subcommand("train-sl", "train the shortest-path regression");
    ctsl->add_option("--graphs", tsl.graphs, "dataset size incl. validation");
    ctsl->add_option("--validation", tsl.validation, "trailing samples held out");
    ctsl->add_option("--k", tsl.k, "message passing iterations per step");
    ctsl->add_option("--unroll", tsl.unroll, "steps backpropagated through");
    ctsl->add_option("--steps", tsl.steps, "training iterations");
    ctsl->add_option("--batch", tsl.batch, "graphs per iteration");
    ctsl->add_option("--nodes", tsl.nodes, "nodes per graph");
    ctsl->add_option("--degree", tsl.degree, "degree of every node");
    ctsl->add_flag("--hops", tsl.hops, "hop-count targets instead of delays");
    ctsl->add_option("--dataset", tsl.dataset, "load this dataset file instead of generating");
    ctsl->add_option("--seed", tsl.seed, "dataset and init seed");
    ctsl->add_option("--out", tsl.out, "output directory")->required();

    EvalSlArgs esl;
    auto* cesl = app.add_subcommand("eval-sl", "evaluate a regression model on fresh graphs");
    cesl->add_option("--model", esl.model, "model checkpoint")->required();
    cesl->add_option("--graphs", esl.graphs, "fresh evaluation graphs");
    cesl->add_option("--seed", esl.seed, "generator seed");
    cesl->add_option("--out", esl.out, "output directory")->required();

    TrainRlArgs trl;
    auto* ctrl = app.add_subcommand("train-rl", "train a routing policy");
    ctrl->add_option("--graph", trl.graph_file,
                     "fixed graph file (plain q-network); omit for random graphs");
    ctrl->add_option("--mode", trl.mode, "unlimited or limited")
        ->check(CLI::IsMember({"unlimited", "limited"}));
    ctrl->add_option("--steps", trl.steps, "environment steps");
    ctrl->add_option("--packets", trl.packets, "packets in flight");
    ctrl->add_option("--nodes", trl.nodes, "nodes per generated graph");
    ctrl->add_option("--degree", trl.degree, "degree per generated graph");
    ctrl->add_option("--config", trl.config_file, "json overriding any training field");
    ctrl->add_option("--seed", trl.seed, "training seed");
    ctrl->add_option("--out", trl.out, "output directory")->required();

    EvalRlArgs erl;
    auto* cerl = app.add_subcommand("eval-rl", "evaluate routing policies against the baseline");
    cerl->add_option("--model", erl.models, "policy checkpoint (repeat for multi-seed)")
        ->required();
    cerl->add_option("--suite", erl.suite, "graph suite directory");
    cerl->add_option("--graph", erl.graph_file, "single graph file");
    cerl->add_option("--graphs", erl.graphs, "cap on suite size (0 = all)");
    cerl->add_option("--mode", erl.mode, "unlimited or limited")
        ->check(CLI::IsMember({"unlimited", "limited"}));
    cerl->add_flag("--mask", erl.mask, "restrict to unvisited neighbors, drop dead ends");
    cerl->add_option("--episodes", erl.episodes, "episodes per graph");
    cerl->add_option("--episode-len", erl.episode_len, "steps per episode");
    cerl->add_option("--packets", erl.packets, "packets in flight");
    cerl->add_option("--seed", erl.seed, "environment seed");
    cerl->add_option("--out", erl.out, "output directory")->required();

    AdaptArgs ada;
    auto* cada = app.add_subcommand("adapt", "edge-delay adaptation experiment");
    cada->add_option("--model", ada.model, "recurrent policy checkpoint")->required();
    cada->add_option("--graph", ada.graph_file, "graph file")->required();
    cada->add_option("--episodes", ada.episodes, "averaging episodes");
    cada->add_option("--episode-len", ada.episode_len, "steps per episode");
    cada->add_option("--packets", ada.packets, "packets in flight");
    cada->add_option("--mode", ada.mode, "unlimited or limited")
        ->check(CLI::IsMember({"unlimited", "limited"}));
    cada->add_option("--edge", ada.edge, "edge index to slow down (-1 = auto)");
    cada->add_option("--new-delay", ada.new_delay, "delay after the change");
    cada->add_option("--change-step", ada.change_step, "step of the change");
    cada->add_flag("--control", ada.control, "run without the override");
    cada->add_option("--seed", ada.seed, "episode seed base");
    cada->add_option("--out", ada.out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (cgen->parsed()) return cmd_gen_graphs(gen);
        if (cbase->parsed()) return cmd_baseline_sp(base);
        if (ctsl->parsed()) return cmd_train_sl(tsl);
        if (cesl->parsed()) return cmd_eval_sl(esl);
        if (ctrl->parsed()) return cmd_train_rl(trl);
        if (cerl->parsed()) return cmd_eval_rl(erl);
        if (cada->parsed()) return cmd_adapt(ada);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
