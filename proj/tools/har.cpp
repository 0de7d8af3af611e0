#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "har/dataset.hpp"
#include "har/fusion.hpp"
#include "har/image.hpp"
#include "har/introspect.hpp"
#include "har/metrics.hpp"
#include "har/model.hpp"
#include "har/model_io.hpp"
#include "har/occlusion.hpp"
#include "har/rng.hpp"

namespace fs = std::filesystem;
using namespace har;

namespace {

struct CommonOptions {
    std::string data_root;
    std::uint64_t seed = 1;
    std::string out = "har_out";
    bool synthetic = false;
    int synthetic_per_class = 10;
    std::uint64_t synthetic_seed = 2024;
};

struct NetworkOptions {
    std::string arch = "cnn";
    std::size_t depth = 3;
    std::size_t epochs = 50;
    std::size_t batch = 32;
    double lr = 0.01;
    std::size_t filters = 50;
    std::size_t hidden = kDefaultLstmHidden;
    double dropout = 0.5;
    std::string columns;
};

struct Splits {
    LabeledDataset train;
    LabeledDataset test;
};

// Accepts "3", "1,2,5" or "1..3".
std::vector<std::size_t> parse_index_list(const std::string& text, const std::string& what) {
    std::vector<std::size_t> out;
    auto number = [&](std::string_view s) {
        std::size_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
            throw std::invalid_argument(what + ": cannot parse '" + std::string(s) + "'");
        }
        return v;
    };
    std::string_view rest = text;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        if (const auto dots = item.find(".."); dots != std::string_view::npos) {
            const std::size_t lo = number(item.substr(0, dots)), hi = number(item.substr(dots + 2));
            if (lo > hi) throw std::invalid_argument(what + ": empty range '" + std::string(item) + "'");
            for (std::size_t v = lo; v <= hi; ++v) out.push_back(v);
        } else {
            out.push_back(number(item));
        }
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    if (out.empty()) throw std::invalid_argument(what + ": empty list");
    return out;
}

Splits load_splits(const CommonOptions& opt) {
    if (opt.synthetic) {
        const std::uint64_t base = derive_seed(opt.synthetic_seed, seed_stream::kSynthetic);
        return {synthesize(6, opt.synthetic_per_class, base),
                synthesize(6, opt.synthetic_per_class, derive_seed(base, 1))};
    }
    if (opt.data_root.empty()) {
        throw std::invalid_argument("no dataset: pass --data-root, set HAR_DATA_ROOT or use --synthetic");
    }
    return {load_uci_har(opt.data_root, Split::Train), load_uci_har(opt.data_root, Split::Test)};
}

// Test split standardized with the statistics the model was trained under.
LabeledDataset standardized_test(const Splits& s, const std::optional<ChannelStats>& stats) {
    const ChannelStats used = stats ? *stats : standardize(s.train).second;
    return standardize(s.test, used).first;
}

NetworkConfig network_config(const NetworkOptions& n, std::uint64_t seed) {
    NetworkConfig c;
    const auto arch = architecture_from_name(n.arch);
    if (!arch) throw std::invalid_argument("--arch must be cnn or cnn-lstm");
    c.arch = *arch;
    c.conv_depth = n.depth;
    c.epochs = n.epochs;
    c.batch_size = n.batch;
    c.learning_rate = n.lr;
    c.filters_per_layer = n.filters;
    c.dropout_prob = n.dropout;
    c.seed = seed;
    if (c.arch == Architecture::CnnLstm) c.lstm_hidden = n.hidden;
    c.validate();
    return c;
}

ColumnSet column_list(const std::string& text) {
    if (text.empty()) return all_columns();
    ColumnSet cols = parse_index_list(text, "--columns");
    validate_columns(cols);
    return cols;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot write");
    out << text;
}

std::string counts_table(const std::vector<std::pair<std::string, const LabeledDataset*>>& sets) {
    std::ostringstream out;
    out << std::left << std::setw(10) << "split";
    for (auto a : kAllActivities) out << std::setw(12) << activity_name(a);
    out << "total\n";
    for (const auto& [name, ds] : sets) {
        out << std::setw(10) << name;
        for (auto n : ds->class_counts()) out << std::setw(12) << n;
        out << ds->size() << '\n';
    }
    return out.str();
}

std::string counts_csv(const std::vector<std::pair<std::string, const LabeledDataset*>>& sets) {
    std::ostringstream out;
    out << "split";
    for (auto a : kAllActivities) out << ',' << activity_name(a);
    out << ",total\n";
    for (const auto& [name, ds] : sets) {
        out << name;
        for (auto n : ds->class_counts()) out << ',' << n;
        out << ',' << ds->size() << '\n';
    }
    return out.str();
}

void cmd_ingest(const CommonOptions& opt, const std::string& export_dir) {
    const Splits s = load_splits(opt);
    const std::vector<std::pair<std::string, const LabeledDataset*>> sets = {{"train", &s.train},
                                                                              {"test", &s.test}};
    std::cout << counts_table(sets);
    write_file(fs::path(opt.out) / "summary.csv", counts_csv(sets));
    if (!export_dir.empty()) {
        export_uci_layout(s.train, export_dir, Split::Train);
        export_uci_layout(s.test, export_dir, Split::Test);
        std::cout << "exported to " << export_dir << '\n';
    }
}

std::string history_csv(const std::vector<EpochStats>& history) {
    std::ostringstream out;
    out << std::setprecision(17) << "epoch,loss,accuracy\n";
    for (std::size_t e = 0; e < history.size(); ++e) {
        out << e + 1 << ',' << history[e].loss << ',' << history[e].accuracy << '\n';
    }
    return out.str();
}

double test_accuracy(const TrainedModel& m, const LabeledDataset& test_std) {
    return accuracy(confusion_matrix(predict_full_labels(m, test_std.windows), test_std.labels));
}

void cmd_train(const CommonOptions& opt, const NetworkOptions& n) {
    const Splits s = load_splits(opt);
    NetworkConfig c = network_config(n, opt.seed);
    const ColumnSet cols = column_list(n.columns);
    c.input_channels = cols.size();
    const auto [train_std, stats] = standardize(s.train);
    const TrainedModel m = train(build_network(c), select_columns(train_std, cols), c, cols);
    save_model(m, fs::path(opt.out) / "model.harm");
    write_file(fs::path(opt.out) / "history.csv", history_csv(m.history));
    if (!m.history.empty()) {
        std::cout << "final epoch loss " << m.history.back().loss << ", train accuracy "
                  << m.history.back().accuracy << '\n';
    }
    std::cout << "test accuracy " << test_accuracy(m, standardize(s.test, stats).first) << '\n'
              << "wrote " << (fs::path(opt.out) / "model.harm").string() << '\n';
}

void cmd_sweep(const CommonOptions& opt, const NetworkOptions& n, const std::string& depth_text) {
    const auto depths = parse_index_list(depth_text, "--depths");
    for (auto d : depths) {
        if (d < 1 || d > 5) throw std::invalid_argument("--depths: depth " + std::to_string(d) + " outside 1..5");
    }
    const Splits s = load_splits(opt);
    NetworkConfig c = network_config(n, opt.seed);
    c.arch = Architecture::Cnn;
    c.lstm_hidden.reset();
    const auto [train_std, stats] = standardize(s.train);
    const auto rows = run_depth_sweep(train_std, standardize(s.test, stats).first, depths, c);
    std::ostringstream csv;
    csv << std::setprecision(17) << "depth,accuracy,macro_f1\n";
    for (const auto& r : rows) {
        csv << r.depth << ',' << r.accuracy << ',' << r.macro_f1 << '\n';
        std::cout << "depth " << r.depth << ": accuracy " << r.accuracy << ", macro-F1 " << r.macro_f1 << '\n';
    }
    write_file(fs::path(opt.out) / "sweep.csv", csv.str());
}

void cmd_visualize(const CommonOptions& opt, const std::string& model_path, const std::string& layer_text,
                   std::size_t per_class, const std::string& aggregation_text, std::size_t scale) {
    const TrainedModel m = load_model(model_path);
    const auto agg = aggregation_from_name(aggregation_text);
    if (!agg) throw std::invalid_argument("--aggregation must be meanabs, maxabs or grid");
    const auto layers = layer_text.empty() ? parse_index_list("1.." + std::to_string(m.config.conv_depth), "--layers")
                                           : parse_index_list(layer_text, "--layers");
    for (auto l : layers) {
        if (l < 1 || l > m.config.conv_depth) {
            throw std::invalid_argument("--layers: layer " + std::to_string(l) + " outside 1.." +
                                        std::to_string(m.config.conv_depth));
        }
    }
    const Splits s = load_splits(opt);
    const LabeledDataset test = standardized_test(s, m.input_stats);
    const auto picks = sample_windows_per_activity(test, per_class, opt.seed);
    std::size_t images = 0;
    for (const auto& [label, ids] : picks) {
        for (auto id : ids) {
            const SignalWindow w = select_columns(test.windows[id], m.column_subset);
            for (auto layer : layers) {
                const FeatureMap fm = feature_maps(m, w, layer, id, label);
                const fs::path stem = fs::path(opt.out) / heatmap_stem(fm, *agg);
                const GrayImage img = render_heatmap(fm, *agg, scale);
                write_pgm(img, stem.string() + ".pgm");
                write_png(img, stem.string() + ".png");
                write_aggregated_csv(aggregate(fm, *agg), stem.string() + ".csv");
                ++images;
            }
        }
    }
    std::cout << "rendered " << images << " feature maps into " << opt.out << '\n';
}

void cmd_occlude(const CommonOptions& opt, const std::string& model_path, double threshold,
                 std::size_t max_cols) {
    const TrainedModel m = load_model(model_path);
    const Splits s = load_splits(opt);
    const OcclusionReport report = occlusion_report(m, standardized_test(s, m.input_stats), model_path);
    const SignificantColumns sig = derive_significant_columns(report, threshold, max_cols);
    std::ostringstream text;
    text << report.text() << '\n' << sig.text();
    if (!opt.synthetic) {
        const auto published = reference_occlusion_report();
        text << "\npublished sample numbers:";
        for (auto n : published.sample_counts) text << ' ' << n;
        text << "\nactivities matching the published significant columns: "
             << count_matching_activities(sig) << " of 6\n";
    }
    std::cout << text.str();
    write_file(fs::path(opt.out) / "occlusion.csv", report.csv());
    write_file(fs::path(opt.out) / "occlusion.txt", text.str());
    write_file(fs::path(opt.out) / "significant_columns.txt", sig.text());
}

void cmd_fuse(const CommonOptions& opt, const NetworkOptions& n, const std::string& m1_text,
              const std::string& m2_text) {
    const Splits s = load_splits(opt);
    NetworkOptions lstm = n;
    lstm.arch = "cnn-lstm";
    const NetworkConfig c = network_config(lstm, opt.seed);
    FusionSubsets subsets;
    if (!m1_text.empty()) subsets.m1 = column_list(m1_text);
    if (!m2_text.empty()) subsets.m2 = column_list(m2_text);
    const auto [train_std, stats] = standardize(s.train);
    const FusionEnsemble e = train_fusion(train_std, c, subsets);
    save_ensemble(e, opt.out);
    const LabeledDataset test = standardize(s.test, stats).first;
    std::cout << "test accuracy main " << test_accuracy(e.main, test) << ", m1 " << test_accuracy(e.m1, test)
              << ", m2 " << test_accuracy(e.m2, test) << ", fusion "
              << accuracy(confusion_matrix(predict_fusion_batch(e, test.windows), test.labels)) << '\n'
              << "wrote ensemble to " << opt.out << '\n';
}

std::string result_name(const TrainedModel& m, bool synthetic) {
    std::string name = m.config.arch == Architecture::Cnn ? "CNN" : "CNN-LSTM";
    if (m.config.conv_depth != 3) name += " depth " + std::to_string(m.config.conv_depth);
    if (m.column_subset != all_columns()) name += " subset";
    if (synthetic) name += " (synthetic)";
    return name;
}

void cmd_eval(const CommonOptions& opt, const std::string& model_path, const std::string& ensemble_dir) {
    if (model_path.empty() == ensemble_dir.empty()) {
        throw std::invalid_argument("eval needs exactly one of --model or --ensemble");
    }
    const Splits s = load_splits(opt);
    std::vector<ActivityLabel> predictions;
    std::string name;
    std::ostringstream extra;
    if (!ensemble_dir.empty()) {
        const FusionEnsemble e = load_ensemble(ensemble_dir);
        const LabeledDataset test = standardized_test(s, e.main.input_stats);
        predictions = predict_fusion_batch(e, test.windows);
        name = opt.synthetic ? "Fusion (synthetic)" : "Fusion";
        extra << "member accuracy: main " << test_accuracy(e.main, test) << ", m1 " << test_accuracy(e.m1, test)
              << ", m2 " << test_accuracy(e.m2, test) << '\n';
    } else {
        const TrainedModel m = load_model(model_path);
        const LabeledDataset test = standardized_test(s, m.input_stats);
        predictions = predict_full_labels(m, test.windows);
        name = result_name(m, opt.synthetic);
    }
    const ConfusionMatrix cm = confusion_matrix(predictions, s.test.labels);
    const NamedResult result{name, accuracy(cm), macro_f1(cm)};
    const ComparisonReport report = compare_report(std::span<const NamedResult>(&result, 1));

    std::ostringstream text;
    text << report.text() << '\n' << extra.str() << "accuracy " << result.accuracy << " ("
         << cm.counts[0][0] + cm.counts[1][1] + cm.counts[2][2] + cm.counts[3][3] + cm.counts[4][4] +
                cm.counts[5][5]
         << '/' << cm.total() << "), macro-F1 " << result.f1 << "\n\nper-class precision/recall/F1\n";
    const auto scores = per_class_scores(cm);
    for (std::size_t k = 0; k < kActivityCount; ++k) {
        text << std::left << std::setw(11) << activity_name(activity_from_index(k)) << std::fixed
             << std::setprecision(4) << scores[k].precision << "  " << scores[k].recall << "  " << scores[k].f1
             << '\n';
    }
    text << '\n' << format_confusion(cm, true) << '\n' << format_confusion(cm, false);
    std::cout << text.str();
    write_file(fs::path(opt.out) / "metrics.txt", text.str());
    write_file(fs::path(opt.out) / "report.csv", report.csv());
    write_file(fs::path(opt.out) / "confusion.csv", confusion_csv(cm));
}

// Resolved values of the global options and the chosen command, loadable
// again through --config.
std::string manifest(const CLI::App& app, const CLI::App& command) {
    std::ostringstream out;
    auto emit = [&out](const CLI::App& owner) {
        for (const CLI::Option* o : owner.get_options()) {
            const std::string name = o->get_single_name();
            if (name.empty() || name == "help" || name == "config" || !o->get_configurable()) continue;
            std::string value;
            if (o->count() > 0) {
                value = o->get_type_size() == 0 ? "true" : o->as<std::string>();
            } else {
                value = o->get_type_size() == 0 ? "false" : o->get_default_str();
            }
            std::string quoted;
            for (char ch : value) {
                if (ch == '"' || ch == '\\') quoted += '\\';
                quoted += ch;
            }
            out << name << " = \"" << quoted << "\"\n";
        }
    };
    emit(app);
    out << "\n[" << command.get_name() << "]\n";
    emit(command);
    return out.str();
}

void add_network_options(CLI::App* sub, NetworkOptions& n) {
    sub->add_option("--arch", n.arch, "cnn or cnn-lstm")->check(CLI::IsMember({"cnn", "cnn-lstm"}));
    sub->add_option("--depth", n.depth, "convolution blocks")->check(CLI::Range(1, 5));
    sub->add_option("--epochs", n.epochs, "training epochs");
    sub->add_option("--batch", n.batch, "mini-batch size")->check(CLI::PositiveNumber);
    sub->add_option("--lr", n.lr, "SGD learning rate")->check(CLI::PositiveNumber);
    sub->add_option("--filters", n.filters, "kernels per convolution")->check(CLI::PositiveNumber);
    sub->add_option("--hidden", n.hidden, "LSTM hidden size")->check(CLI::PositiveNumber);
    sub->add_option("--dropout", n.dropout, "dropout probability")->check(CLI::Range(0.0, 0.999999));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Human activity recognition with CNN, CNN-LSTM and fused ensembles"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "read options from a TOML file; command-line flags win");

    CommonOptions opt;
    if (const char* env = std::getenv("HAR_DATA_ROOT")) opt.data_root = env;
    app.add_option("--data-root", opt.data_root, "UCI HAR root (default $HAR_DATA_ROOT)");
    app.add_option("--seed", opt.seed, "master seed");
    app.add_option("--out", opt.out, "output directory");
    app.add_flag("--synthetic", opt.synthetic, "use the generated dataset instead of UCI HAR");
    app.add_option("--synthetic-per-class", opt.synthetic_per_class, "generated windows per class and split")
        ->check(CLI::PositiveNumber);
    app.add_option("--synthetic-seed", opt.synthetic_seed, "seed of the generated dataset");

    NetworkOptions net;
    std::string export_dir, depths = "1..5", model_path, ensemble_dir, layers, aggregation = "meanabs";
    std::string m1_columns, m2_columns;
    std::size_t per_class = 1, scale = 8, max_cols = kDefaultMaxSignificantColumns;
    double threshold = kDefaultSignificanceThreshold;

    auto* ingest = app.add_subcommand("ingest", "summarize the dataset per split and class");
    ingest->add_option("--export", export_dir, "also write the splits in the UCI text layout");

    auto* train_cmd = app.add_subcommand("train", "train one model");
    add_network_options(train_cmd, net);
    train_cmd->add_option("--columns", net.columns, "column subset, e.g. 3,4,6,7 (default all)");

    auto* sweep = app.add_subcommand("sweep", "train CNNs of several depths and compare");
    add_network_options(sweep, net);
    sweep->add_option("--depths", depths, "depth list, e.g. 1..5 or 1,3");

    auto* visualize = app.add_subcommand("visualize", "render feature maps of sampled test windows");
    visualize->add_option("--model", model_path, "model file")->required();
    visualize->add_option("--layers", layers, "block list, e.g. 1..3 (default all)");
    visualize->add_option("--per-class", per_class, "windows per activity")->check(CLI::PositiveNumber);
    visualize->add_option("--aggregation", aggregation, "meanabs, maxabs or grid");
    visualize->add_option("--scale", scale, "pixels per cell")->check(CLI::PositiveNumber);

    auto* occlude = app.add_subcommand("occlude", "column occlusion report of a nine-column model");
    occlude->add_option("--model", model_path, "model file")->required();
    occlude->add_option("--threshold", threshold, "retention below which a column is significant")
        ->check(CLI::Range(0.0, 1.0));
    occlude->add_option("--max-cols", max_cols, "significant columns kept per activity")->check(CLI::Range(1, 9));

    auto* fuse = app.add_subcommand("fuse", "train the three-model CNN-LSTM ensemble");
    add_network_options(fuse, net);
    fuse->add_option("--m1-columns", m1_columns, "override the first narrowed subset");
    fuse->add_option("--m2-columns", m2_columns, "override the second narrowed subset");

    auto* eval = app.add_subcommand("eval", "evaluate a model or ensemble on the test split");
    eval->add_option("--model", model_path, "model file");
    eval->add_option("--ensemble", ensemble_dir, "ensemble directory");

    for (auto* sub : app.get_subcommands({})) sub->configurable();

    CLI11_PARSE(app, argc, argv);

    try {
        fs::create_directories(opt.out);
        write_file(fs::path(opt.out) / "manifest.toml", manifest(app, *app.get_subcommands().front()));
        if (*ingest) cmd_ingest(opt, export_dir);
        if (*train_cmd) cmd_train(opt, net);
        if (*sweep) cmd_sweep(opt, net, depths);
        if (*visualize) cmd_visualize(opt, model_path, layers, per_class, aggregation, scale);
        if (*occlude) cmd_occlude(opt, model_path, threshold, max_cols);
        if (*fuse) cmd_fuse(opt, net, m1_columns, m2_columns);
        if (*eval) cmd_eval(opt, model_path, ensemble_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
