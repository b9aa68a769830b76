// dhkd: pipeline driver. Exit status 0 on success, 1 on runtime or
// validation failures, 2 on usage errors.

#include <cstring>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "dh/config.hpp"
#include "dh/desk.hpp"
#include "dh/errors.hpp"

namespace {

std::string long_name(const CLI::Option* opt) {
    const auto& names = opt->get_lnames();
    return names.empty() ? std::string{} : names.front();
}

dhkd::Resolved resolved_options(const CLI::App* sub) {
    dhkd::Resolved out;
    for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = long_name(opt);
        if (name.empty() || name == "help" || name == "config") continue;
        if (opt->count() > 0) {
            std::string joined;
            for (const auto& r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
            out[name] = opt->get_type_size() == 0 ? "true" : joined;
        } else {
            out[name] = opt->get_default_str();
        }
    }
    return out;
}

/// Rewrites `sub --config FILE rest...` into `sub <file options> rest...` so
/// that flags given on the command line override values from the file.
std::vector<std::string> expand_config(CLI::App& app, std::vector<std::string> args) {
    if (args.size() < 2) return args;
    CLI::App* sub = nullptr;
    try {
        sub = app.get_subcommand(args[1]);
    } catch (const CLI::OptionNotFound&) {
        return args;
    }
    std::string path;
    std::size_t at = 0, span = 0;
    for (std::size_t i = 2; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            at = i;
            span = 2;
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(std::strlen("--config="));
            at = i;
            span = 1;
            break;
        }
    }
    if (span == 0) return args;

    std::set<std::string> allowed;
    for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = long_name(opt);
        if (!name.empty() && name != "help" && name != "config") allowed.insert(name);
    }
    dh::KeyValueConfig cfg;
    try {
        cfg = dh::KeyValueConfig::load(path, allowed);
    } catch (const dh::InvalidArgument& e) {
        throw dhkd::UsageError(path + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw dhkd::UsageError(e.what());
    }

    std::vector<std::string> injected;
    for (const auto& [key, value] : cfg.values()) {
        const CLI::Option* opt = sub->get_option("--" + key);
        if (opt->get_type_size() == 0) {
            if (value == "true" || value == "1") injected.push_back("--" + key);
            else if (value != "false" && value != "0") throw dhkd::UsageError(path + ": '" + key + "' expects true/false");
        } else {
            injected.push_back("--" + key);
            injected.push_back(value);
        }
    }
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(at), args.begin() + static_cast<std::ptrdiff_t>(at + span));
    args.insert(args.begin() + 2, injected.begin(), injected.end());
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Teacher-to-student distillation from an unlabeled collection", "dhkd"};
    app.require_subcommand(1);
    app.set_version_flag("--version", DHKD_VERSION);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
    std::string config_path;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value file; flags on the command line take precedence");
    };

    std::vector<std::string> collection_names = dh::desk::collection_names();

    dhkd::GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate task splits and an unlabeled tagged collection");
    gen_cmd->add_option("--task", gen.task, "Task preset")->check(CLI::IsMember(dh::desk::task_names()));
    gen_cmd->add_option("--collection", gen.collection, "Collection preset")->check(CLI::IsMember(collection_names));
    gen_cmd->add_option("--n", gen.n, "Collection size before the validation holdout");
    gen_cmd->add_option("--ori", gen.ori, "Override: ori fraction");
    gen_cmd->add_option("--rel", gen.rel, "Override: rel fraction");
    gen_cmd->add_option("--irrel", gen.irrel, "Override: irrel fraction");
    gen_cmd->add_option("--holdout", gen.holdout, "Fraction of the collection held out for validation");
    gen_cmd->add_option("--train-size", gen.train_size, "Task training split size (0 = preset)");
    gen_cmd->add_option("--val-size", gen.val_size, "Task validation split size (0 = preset)");
    gen_cmd->add_option("--test-size", gen.test_size, "Task test split size (0 = preset)");
    gen_cmd->add_option("--seed", gen.seed, "Seed");
    gen_cmd->add_option("--out", gen.out, "Output directory (default $DHKD_OUT or ./dhkd_out)");
    add_config(gen_cmd);

    dhkd::TeachOptions teach;
    auto* teach_cmd = app.add_subcommand("teach", "Train the teacher on the labeled task splits");
    teach_cmd->add_option("--train", teach.train, "Training split (DHUC)");
    teach_cmd->add_option("--val", teach.val, "Validation split (DHUC)");
    teach_cmd->add_option("--test", teach.test, "Optional test split to report accuracy on");
    teach_cmd->add_option("--out", teach.out, "Model output (DHNM)");
    teach_cmd->add_option("--widths", teach.widths, "Hidden and latent widths, e.g. 64,32")->delimiter(',');
    teach_cmd->add_option("--epochs", teach.epochs, "Epochs (0 = preset)");
    teach_cmd->add_option("--batch-size", teach.batch_size, "Batch size (0 = preset)");
    teach_cmd->add_option("--lr", teach.lr, "Learning rate (0 = preset)");
    teach_cmd->add_option("--momentum", teach.momentum, "Momentum (0 = preset)");
    teach_cmd->add_option("--weight-decay", teach.weight_decay, "Weight decay (0 = preset)");
    teach_cmd->add_option("--seed", teach.seed, "Seed");
    add_config(teach_cmd);

    dhkd::ScoreOptions score;
    auto* score_cmd = app.add_subcommand("score", "Cache teacher outputs and compute characterizing scores");
    score_cmd->add_option("--model", score.model, "Teacher model (DHNM)");
    score_cmd->add_option("--collection", score.collection, "Collection (DHUC)");
    score_cmd->add_option("--score", score.score, "Score")->check(CLI::IsMember({"t1000", "1c-sum"}));
    score_cmd->add_option("--out", score.out, "Score output (DHSC)");
    score_cmd->add_option("--cache-out", score.cache_out, "Teacher cache output (DHTC)");
    add_config(score_cmd);

    dhkd::SampleOptions sample;
    auto* sample_cmd = app.add_subcommand("sample", "Build the selection distribution and report selection metrics");
    sample_cmd->add_option("--scores", sample.scores, "Scores (DHSC)");
    sample_cmd->add_option("--collection", sample.collection, "Collection, for tag-based metrics");
    sample_cmd->add_option("--iqpr", sample.iqpr, "Inter-quartile probability ratio (>= 1)");
    sample_cmd->add_option("--draws", sample.draws, "Draws used for the metrics (0 = 20 per sample)");
    sample_cmd->add_option("--seed", sample.seed, "Seed");
    sample_cmd->add_option("--out", sample.out, "Distribution output (DHQD)");
    sample_cmd->add_option("--metrics-out", sample.metrics_out, "Metrics report (key=value)");
    add_config(sample_cmd);

    dhkd::DistillOptions distill;
    auto* distill_cmd = app.add_subcommand("distill", "Train a student from the collection");
    distill_cmd->add_option("--teacher", distill.teacher, "Teacher model (DHNM)");
    distill_cmd->add_option("--collection", distill.collection, "Training collection (DHUC)");
    distill_cmd->add_option("--val-collection", distill.val_collection, "Held-out collection for validation loss");
    distill_cmd->add_option("--test", distill.test, "Labeled test split (DHUC)");
    distill_cmd->add_option("--dist", distill.dist, "Selection distribution (DHQD)");
    distill_cmd->add_option("--cache", distill.cache, "Teacher cache for the collection (DHTC)");
    distill_cmd->add_option("--method", distill.method, "Distillation method")
        ->check(CLI::IsMember({"fixed-linear", "vanilla"}));
    distill_cmd->add_option("--tau", distill.tau, "Softmax temperature of the vanilla loss");
    distill_cmd->add_option("--widths", distill.widths, "Student hidden and latent widths, e.g. 32,16")->delimiter(',');
    distill_cmd->add_option("--lr", distill.lr, "Initial learning rate");
    distill_cmd->add_option("--lr-decay", distill.lr_decay, "Learning-rate factor on a plateau");
    distill_cmd->add_option("--patience", distill.patience, "Pseudo-epochs without improvement before decay");
    distill_cmd->add_option("--pseudo-epoch-size", distill.pseudo_epoch_size, "Draws per pseudo-epoch");
    distill_cmd->add_option("--pseudo-epochs", distill.pseudo_epochs, "Number of pseudo-epochs");
    distill_cmd->add_option("--batch-size", distill.batch_size, "Batch size");
    distill_cmd->add_option("--seed", distill.seed, "Seed");
    distill_cmd->add_option("--collection-name", distill.collection_name, "Label recorded in the run summary");
    distill_cmd->add_flag("--init-from-teacher", distill.init_from_teacher,
                          "Start from a copy of the teacher extractor");
    distill_cmd->add_option("--out", distill.out, "Run directory");
    add_config(distill_cmd);

    dhkd::EvalOptions eval;
    auto* eval_cmd = app.add_subcommand("eval", "Print the accuracy of a model on labeled data");
    eval_cmd->add_option("--model", eval.model, "Model (DHNM)");
    eval_cmd->add_option("--data", eval.data, "Labeled data (DHUC)");
    add_config(eval_cmd);

    dhkd::ReportOptions report;
    auto* report_cmd = app.add_subcommand("report", "Aggregate run directories into an accuracy-vs-budget CSV");
    report_cmd->add_option("runs", report.runs, "Run directories (searched recursively)")->required();
    report_cmd->add_option("--out", report.out, "CSV output (default stdout)");
    add_config(report_cmd);

    std::vector<std::string> args(argv, argv + argc);
    try {
        args = expand_config(app, std::move(args));
    } catch (const dhkd::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }
    std::vector<char*> cargs;
    for (auto& a : args) cargs.push_back(a.data());

    try {
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen_cmd) return dhkd::run_gen(gen, resolved_options(gen_cmd));
        if (*teach_cmd) return dhkd::run_teach(teach, resolved_options(teach_cmd));
        if (*score_cmd) return dhkd::run_score(score, resolved_options(score_cmd));
        if (*sample_cmd) return dhkd::run_sample(sample, resolved_options(sample_cmd));
        if (*distill_cmd) return dhkd::run_distill(distill, resolved_options(distill_cmd));
        if (*eval_cmd) return dhkd::run_eval(eval);
        if (*report_cmd) return dhkd::run_report(report);
    } catch (const dhkd::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const dh::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 1;
    } catch (const dh::CrossFileError& e) {
        std::cerr << "cross-file error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
