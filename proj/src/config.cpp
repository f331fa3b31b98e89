#include "sgl/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "sgl/csv.hpp"
#include "sgl/errors.hpp"

namespace sgl {

namespace {

constexpr const char* kVersion = "sgl 1.0.0";

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

double parse_number(const std::string& tok) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw ConfigError("trailing junk in number: " + tok);
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + tok + "'");
    }
}

ConfigValue::Table parse_inline_table(const std::string& body) {
    ConfigValue::Table table;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string entry = trim(item);
        if (entry.empty()) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) throw ConfigError("bad inline table entry: " + entry);
        table[trim(entry.substr(0, eq))] = parse_number(trim(entry.substr(eq + 1)));
    }
    return table;
}

ConfigValue parse_value(const std::string& raw) {
    const std::string tok = trim(raw);
    if (tok.empty()) throw ConfigError("empty config value");
    ConfigValue v;
    if (tok.front() == '"') {
        if (tok.size() < 2 || tok.back() != '"') throw ConfigError("unterminated string: " + tok);
        v.data = tok.substr(1, tok.size() - 2);
        return v;
    }
    if (tok == "true" || tok == "false") {
        v.data = (tok == "true");
        return v;
    }
    if (tok.front() == '[') {
        if (tok.back() != ']') throw ConfigError("unterminated array: " + tok);
        const std::string body = trim(tok.substr(1, tok.size() - 2));
        if (body.empty()) {
            v.data = std::vector<double>{};
            return v;
        }
        if (body.front() == '{') {
            std::vector<ConfigValue::Table> tables;
            std::size_t at = 0;
            while (at < body.size()) {
                const auto open = body.find('{', at);
                if (open == std::string::npos) break;
                const auto close = body.find('}', open);
                if (close == std::string::npos) throw ConfigError("unterminated inline table");
                tables.push_back(parse_inline_table(body.substr(open + 1, close - open - 1)));
                at = close + 1;
            }
            v.data = std::move(tables);
            return v;
        }
        std::vector<double> nums;
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) nums.push_back(parse_number(trim(item)));
        v.data = std::move(nums);
        return v;
    }
    v.data = parse_number(tok);
    return v;
}

std::string serialize_value(const ConfigValue& v) {
    std::ostringstream out;
    if (const auto* num = std::get_if<double>(&v.data)) {
        out << format_number(*num);
    } else if (const auto* flag = std::get_if<bool>(&v.data)) {
        out << (*flag ? "true" : "false");
    } else if (const auto* str = std::get_if<std::string>(&v.data)) {
        out << '"' << *str << '"';
    } else if (const auto* arr = std::get_if<std::vector<double>>(&v.data)) {
        out << '[';
        for (std::size_t i = 0; i < arr->size(); ++i) {
            if (i) out << ", ";
            out << format_number((*arr)[i]);
        }
        out << ']';
    } else if (const auto* tabs = std::get_if<std::vector<ConfigValue::Table>>(&v.data)) {
        out << '[';
        for (std::size_t i = 0; i < tabs->size(); ++i) {
            if (i) out << ", ";
            out << '{';
            bool first = true;
            for (const auto& [k, val] : (*tabs)[i]) {
                if (!first) out << ", ";
                out << k << " = " << format_number(val);
                first = false;
            }
            out << '}';
        }
        out << ']';
    }
    return out.str();
}

}  // namespace

ConfigFile ConfigFile::parse_text(const std::string& text) {
    ConfigFile cfg;
    std::stringstream ss(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const std::string body = trim(strip_comment(line));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') {
                throw ConfigError("bad section header at line " + std::to_string(line_no));
            }
            section = trim(body.substr(1, body.size() - 2));
            cfg.sections_[section];
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected key = value at line " + std::to_string(line_no));
        }
        const std::string key = trim(body.substr(0, eq));
        if (key.empty()) throw ConfigError("empty key at line " + std::to_string(line_no));
        cfg.sections_[section][key] = parse_value(body.substr(eq + 1));
    }
    return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
}

void ConfigFile::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be section.key=value");
    const std::string path = trim(assignment.substr(0, eq));
    const auto dot = path.find('.');
    if (dot == std::string::npos) throw ConfigError("override key must be section.key");
    sections_[path.substr(0, dot)][path.substr(dot + 1)] = parse_value(assignment.substr(eq + 1));
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    if (!has(section, key)) return fallback;
    const auto& v = sections_.at(section).at(key).data;
    if (const auto* num = std::get_if<double>(&v)) return *num;
    throw ConfigError(section + "." + key + " is not a number");
}

std::int64_t ConfigFile::get_int(const std::string& section, const std::string& key,
                                 std::int64_t fallback) const {
    return static_cast<std::int64_t>(get_double(section, key, static_cast<double>(fallback)));
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
    if (!has(section, key)) return fallback;
    const auto& v = sections_.at(section).at(key).data;
    if (const auto* flag = std::get_if<bool>(&v)) return *flag;
    throw ConfigError(section + "." + key + " is not a boolean");
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
    if (!has(section, key)) return fallback;
    const auto& v = sections_.at(section).at(key).data;
    if (const auto* str = std::get_if<std::string>(&v)) return *str;
    throw ConfigError(section + "." + key + " is not a string");
}

std::vector<double> ConfigFile::get_array(const std::string& section, const std::string& key,
                                          std::vector<double> fallback) const {
    if (!has(section, key)) return fallback;
    const auto& v = sections_.at(section).at(key).data;
    if (const auto* arr = std::get_if<std::vector<double>>(&v)) return *arr;
    throw ConfigError(section + "." + key + " is not an array");
}

std::vector<ConfigValue::Table> ConfigFile::get_tables(const std::string& section,
                                                       const std::string& key) const {
    if (!has(section, key)) return {};
    const auto& v = sections_.at(section).at(key).data;
    if (const auto* tabs = std::get_if<std::vector<ConfigValue::Table>>(&v)) return *tabs;
    throw ConfigError(section + "." + key + " is not a table array");
}

void ConfigFile::set(const std::string& section, const std::string& key, ConfigValue value) {
    sections_[section][key] = std::move(value);
}

std::string ConfigFile::serialize() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& [section, keys] : sections_) {
        if (!first) out << '\n';
        first = false;
        out << '[' << section << "]\n";
        for (const auto& [key, value] : keys) {
            out << key << " = " << serialize_value(value) << '\n';
        }
    }
    return out.str();
}

bool ConfigFile::operator==(const ConfigFile& other) const {
    return serialize() == other.serialize();
}

LinearSde sde_from_config(const ConfigFile& cfg) {
    const std::string preset = cfg.get_string("sde", "preset", "ou");
    const double T = cfg.get_double("sde", "horizon_T", 3.0);
    if (preset == "ou") return LinearSde::ou(T);
    if (preset == "ve") return LinearSde::ve_const(T, cfg.get_double("sde", "g_const", 1.0));
    if (preset == "custom") {
        CoeffTable f{cfg.get_array("sde", "f_times", {}), cfg.get_array("sde", "f_values", {})};
        CoeffTable g{cfg.get_array("sde", "g_times", {}), cfg.get_array("sde", "g_values", {})};
        return LinearSde::custom(T, std::move(f), std::move(g));
    }
    throw ConfigError("unknown sde preset: " + preset);
}

GaussianMixture target_with_mu(double mu) { return GaussianMixture::two_mode(mu); }

GaussianMixture target_from_config(const ConfigFile& cfg) {
    const auto modes = cfg.get_tables("target", "modes");
    if (modes.empty()) {
        return target_with_mu(cfg.get_double("target", "mu", 3.0));
    }
    std::vector<double> q, mu, var;
    for (const auto& mode : modes) {
        q.push_back(mode.count("q") ? mode.at("q") : 1.0 / modes.size());
        mu.push_back(mode.count("mu") ? mode.at("mu") : 0.0);
        var.push_back(mode.count("var") ? mode.at("var") : 1.0);
    }
    return GaussianMixture(q, mu, var);
}

std::unique_ptr<ScoreModel> model_from_config(const ConfigFile& cfg, const LinearSde& sde,
                                              std::uint64_t init_seed) {
    const std::string kind = cfg.get_string("model", "kind", "swish");
    const int d_e = static_cast<int>(cfg.get_int("model", "d_e", 4));
    if (kind == "swish") {
        const int hidden = static_cast<int>(cfg.get_int("model", "hidden", 128));
        return std::make_unique<SwishMlp>(SwishMlp::init(1, hidden, d_e, sde.horizon(), init_seed));
    }
    if (kind == "rf") {
        const int width = static_cast<int>(cfg.get_int("model", "width", 128));
        return std::make_unique<RandomFeatureNet>(
            RandomFeatureNet::init(1, width, d_e, sde.horizon(), init_seed));
    }
    throw ConfigError("unknown model kind: " + kind);
}

TrainConfig train_config_from(const ConfigFile& cfg) {
    TrainConfig tc;
    const std::string opt = cfg.get_string("train", "optimizer", "sgd");
    if (opt == "sgd") tc.optimizer = Optimizer::Sgd;
    else if (opt == "adam") tc.optimizer = Optimizer::Adam;
    else if (opt == "gradient-flow-euler") tc.optimizer = Optimizer::GradientFlowEuler;
    else throw ConfigError("unknown optimizer: " + opt);
    tc.learning_rate = cfg.get_double("train", "learning_rate", 0.5);
    tc.epochs = static_cast<int>(cfg.get_int("train", "epochs", 1000));
    tc.batch_size = static_cast<int>(cfg.get_int("train", "batch_size", 128));
    tc.n = static_cast<int>(cfg.get_int("train", "n", 1000));
    tc.eval_every = static_cast<int>(cfg.get_int("train", "eval_every", 10));
    tc.kl_eval = cfg.get_bool("train", "kl_eval", true);
    const std::string mode = cfg.get_string("train", "noise_mode", "fresh");
    if (mode == "fresh") tc.noise_mode = NoiseMode::Fresh;
    else if (mode == "frozen") tc.noise_mode = NoiseMode::Frozen;
    else throw ConfigError("unknown noise_mode: " + mode);
    tc.sm_eval_tpoints = static_cast<int>(cfg.get_int("train", "sm_eval_tpoints", 8));
    tc.sm_eval_grid_stride = static_cast<int>(cfg.get_int("train", "sm_eval_grid_stride", 4));
    tc.grid_points = static_cast<int>(cfg.get_int("train", "grid_points", 4096));
    tc.validate();
    return tc;
}

void RunManifest::add(const std::string& path) {
    if (std::find(artifacts.begin(), artifacts.end(), path) != artifacts.end()) {
        throw ConfigError("artifact registered twice: " + path);
    }
    artifacts.push_back(path);
}

void RunManifest::write(const std::string& out_dir) const {
    nlohmann::json j;
    j["config"] = config_text;
    j["artifacts"] = artifacts;
    j["wall_clock_sec"] = wall_clock_sec;
    j["version"] = version.empty() ? kVersion : version;
    j["master_seed"] = master_seed;
    j["run_seeds"] = run_seeds;
    std::ofstream out(out_dir + "/manifest.json");
    if (!out) throw ConfigError("cannot write manifest in " + out_dir);
    out << j.dump(2) << "\n";
}

bool manifest_present(const std::string& out_dir) {
    std::ifstream in(out_dir + "/manifest.json");
    return static_cast<bool>(in);
}

}  // namespace sgl
