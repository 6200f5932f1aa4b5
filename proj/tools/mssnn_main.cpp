#include <iostream>

#include "CLI11.hpp"
#include "mssnn/pipeline.hpp"

using namespace mssnn;

int main(int argc, char** argv) {
    CLI::App app{"mssnn - multitask dual-encoder retrieval pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // lets --config and friends appear after the subcommand

    std::string config_path;
    std::uint64_t seed_override = 0;
    bool quiet = false;
    app.add_option("--config", config_path, "run configuration file")->required();
    app.add_option("--seed", seed_override, "override the config seed");
    app.add_flag("--quiet", quiet, "suppress progress output");

    CLI::App* prepare = app.add_subcommand("prepare", "build vocabulary and word targets");
    CLI::App* train = app.add_subcommand("train", "train the model, writing checkpoints");
    CLI::App* index = app.add_subcommand("index", "project responses and build the ann index");

    CLI::App* query = app.add_subcommand("query", "retrieve responses for one query");
    std::string query_text;
    std::size_t query_k = 10;
    std::string query_mode = "exact";
    query->add_option("--text", query_text, "query text")->required();
    query->add_option("-k,--top", query_k, "results to return");
    query->add_option("--mode", query_mode, "exact or ann")
        ->check(CLI::IsMember({"exact", "ann"}));

    CLI::App* eval = app.add_subcommand("eval", "score retrieval against a ground-truth file");
    CLI::App* bench = app.add_subcommand("bench", "measure retrieval latency per engine");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (app.count("--seed") > 0) cfg.seed = seed_override;
        cfg.validate();
        if (prepare->parsed()) cmd_prepare(cfg, quiet, std::cout);
        if (train->parsed()) cmd_train(cfg, quiet, std::cout);
        if (index->parsed()) cmd_index(cfg, quiet, std::cout);
        if (query->parsed()) cmd_query(cfg, query_text, query_k, query_mode == "ann", std::cout);
        if (eval->parsed()) cmd_eval(cfg, quiet, std::cout);
        if (bench->parsed()) cmd_bench(cfg, quiet, std::cout);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
