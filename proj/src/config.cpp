#include "ste/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>

namespace ste {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

class KeyValues {
public:
    explicit KeyValues(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open config file " + path.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            const std::size_t eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) +
                                  " is not 'key = value': '" + t + "'");
            const std::string key = trim(t.substr(0, eq));
            const std::string value = trim(t.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(line_no) +
                                  " has an empty key");
            if (kv_.count(key))
                throw ConfigError("duplicate config key '" + key + "'");
            kv_[key] = value;
        }
    }

    std::optional<std::string> take(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return std::nullopt;
        std::string v = it->second;
        kv_.erase(it);
        return v;
    }

    std::string require(const std::string& key) {
        auto v = take(key);
        if (!v) throw ConfigError("missing required config key '" + key + "'");
        return *v;
    }

    void reject_leftovers() const {
        if (!kv_.empty())
            throw ConfigError("unknown config key '" + kv_.begin()->first +
                              "'");
    }

private:
    std::map<std::string, std::string> kv_;
};

double to_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': '" + v +
                          "' is not a number");
    return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
    unsigned long long out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': '" + v +
                          "' is not a non-negative integer");
    return static_cast<std::size_t>(out);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': '" + v +
                      "' is not a boolean (true/false)");
}

std::vector<std::size_t> to_count_list(const std::string& key,
                                       const std::string& v) {
    std::vector<std::size_t> out;
    std::string cur;
    for (char c : v + ",") {
        if (c == ',') {
            const std::string t = trim(cur);
            if (!t.empty()) out.push_back(to_count(key, t));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (out.empty())
        throw ConfigError("config key '" + key + "' has no entries");
    return out;
}

} // namespace

RunSetup load_config(const std::filesystem::path& path) {
    KeyValues kv(path);
    RunSetup s;

    const std::string fmt = kv.require("data_format");
    if (fmt == "csv")
        s.format = DataFormat::Csv;
    else if (fmt == "idx")
        s.format = DataFormat::Idx;
    else
        throw ConfigError("data_format must be 'csv' or 'idx', got '" + fmt +
                          "'");

    if (s.format == DataFormat::Csv) {
        s.train_data = kv.require("train_data");
        s.test_data = kv.require("test_data");
        if (auto v = kv.take("label_column")) s.label_column = *v;
        if (auto v = kv.take("csv_header"))
            s.csv_header = to_bool("csv_header", *v);
    } else {
        s.train_images = kv.require("train_images");
        s.train_labels = kv.require("train_labels");
        s.test_images = kv.require("test_images");
        s.test_labels = kv.require("test_labels");
    }
    if (auto v = kv.take("normalize"))
        s.normalize_features = to_bool("normalize", *v);

    s.input_dim = to_count("input_dim", kv.require("input_dim"));
    s.classes = to_count("classes", kv.require("classes"));
    s.hidden = to_count_list("hidden", kv.require("hidden"));

    if (auto v = kv.take("hidden_kind")) {
        if (*v == "dense")
            s.hidden_kind = LayerKind::Dense;
        else if (*v == "ste")
            s.hidden_kind = LayerKind::Ste;
        else
            throw ConfigError("hidden_kind must be 'dense' or 'ste', got '" +
                              *v + "'");
    }
    if (auto v = kv.take("activation")) s.hidden_act = parse_activation(*v);
    if (auto v = kv.take("ste_A")) s.ste_ensemble = to_count("ste_A", *v);
    if (auto v = kv.take("ste_p")) s.ste_p = to_real("ste_p", *v);
    if (auto v = kv.take("ste_noise")) s.ste_noise = parse_noise_mode(*v);
    if (auto v = kv.take("output_dropout"))
        s.output_dropout = to_bool("output_dropout", *v);
    if (auto v = kv.take("output_dropout_p"))
        s.output_dropout_p = to_real("output_dropout_p", *v);

    if (auto v = kv.take("learning_rate"))
        s.train.learning_rate = to_real("learning_rate", *v);
    if (auto v = kv.take("decay")) s.train.decay = to_real("decay", *v);
    if (auto v = kv.take("momentum"))
        s.train.momentum = to_real("momentum", *v);
    if (auto v = kv.take("batch_size"))
        s.train.batch_size = to_count("batch_size", *v);
    s.train.epochs = to_count("epochs", kv.require("epochs"));
    if (auto v = kv.take("val_fraction"))
        s.train.val_fraction = to_real("val_fraction", *v);
    if (auto v = kv.take("seed"))
        s.train.seed = static_cast<std::uint64_t>(to_count("seed", *v));

    if (auto v = kv.take("out_dir")) s.out_dir = *v;

    kv.reject_leftovers();
    s.train.validate();
    s.model_spec().validate();
    return s;
}

ModelSpec RunSetup::model_spec() const {
    ModelSpec spec;
    spec.input_dim = input_dim;
    for (std::size_t h : hidden) {
        LayerSpec ls;
        ls.kind = hidden_kind;
        ls.out_dim = h;
        ls.act = hidden_act;
        ls.ensemble = hidden_kind == LayerKind::Ste ? ste_ensemble : 1;
        ls.p = ste_p;
        ls.noise = ste_noise;
        ls.output_dropout = output_dropout;
        ls.p_out = output_dropout_p;
        spec.layers.push_back(ls);
    }
    LayerSpec out;
    out.kind = LayerKind::Dense;
    out.out_dim = classes;
    out.act = Activation::Softmax;
    spec.layers.push_back(out);
    return spec;
}

ExperimentBase RunSetup::experiment_base() const {
    ExperimentBase base;
    base.input_dim = input_dim;
    base.hidden = hidden;
    base.classes = classes;
    base.ensemble = ste_ensemble;
    base.p = ste_p;
    base.p_out = output_dropout_p;
    return base;
}

namespace {

Dataset load_one(const RunSetup& s, bool train_split) {
    try {
        if (s.format == DataFormat::Csv) {
            const std::string& path = train_split ? s.train_data : s.test_data;
            return load_csv(path, s.label_column, s.csv_header);
        }
        const std::string& images = train_split ? s.train_images : s.test_images;
        const std::string& labels = train_split ? s.train_labels : s.test_labels;
        return load_idx(images, labels);
    } catch (const DataError& e) {
        const char* key = s.format == DataFormat::Csv
                              ? (train_split ? "train_data" : "test_data")
                              : (train_split ? "train_images" : "test_images");
        throw DataError(std::string(e.what()) + " (config key '" + key + "')");
    }
}

} // namespace

DataBundle load_bundle(const RunSetup& setup) {
    DataBundle bundle;
    bundle.train = load_one(setup, true);
    bundle.test = load_one(setup, false);
    if (bundle.train.dim() != bundle.test.dim())
        throw DataError("train data has " + std::to_string(bundle.train.dim()) +
                        " features but test data has " +
                        std::to_string(bundle.test.dim()));
    if (setup.normalize_features)
        normalize(bundle.train, {&bundle.test});
    return bundle;
}

} // namespace ste
