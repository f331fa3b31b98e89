#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "sgl/mixture.hpp"
#include "sgl/score_model.hpp"
#include "sgl/sde.hpp"
#include "sgl/training.hpp"

namespace sgl {

// Flat key-value config with sections (TOML-shaped). Values are scalars,
// strings, numeric arrays, or arrays of flat numeric tables (mixture modes).
struct ConfigValue {
    using Table = std::map<std::string, double>;
    std::variant<double, bool, std::string, std::vector<double>, std::vector<Table>> data;
};

class ConfigFile {
  public:
    static ConfigFile parse_text(const std::string& text);
    static ConfigFile parse_file(const std::string& path);

    // CLI override "section.key=value"; value uses the file grammar.
    void apply_override(const std::string& assignment);

    bool has(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key,
                         std::int64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    std::vector<double> get_array(const std::string& section, const std::string& key,
                                  std::vector<double> fallback) const;
    std::vector<ConfigValue::Table> get_tables(const std::string& section,
                                               const std::string& key) const;

    void set(const std::string& section, const std::string& key, ConfigValue value);

    // Deterministic text form; parse(serialize(c)) == c.
    std::string serialize() const;

    bool operator==(const ConfigFile& other) const;

  private:
    std::map<std::string, std::map<std::string, ConfigValue>> sections_;
};

// Materialized experiment inputs.
LinearSde sde_from_config(const ConfigFile& cfg);
GaussianMixture target_from_config(const ConfigFile& cfg);
GaussianMixture target_with_mu(double mu);
std::unique_ptr<ScoreModel> model_from_config(const ConfigFile& cfg, const LinearSde& sde,
                                              std::uint64_t init_seed);
TrainConfig train_config_from(const ConfigFile& cfg);

struct RunManifest {
    std::string config_text;
    std::vector<std::string> artifacts;
    double wall_clock_sec = 0.0;
    std::string version;
    std::uint64_t master_seed = 0;
    std::vector<std::uint64_t> run_seeds;

    void add(const std::string& path);
    void write(const std::string& out_dir) const;
};

bool manifest_present(const std::string& out_dir);

}  // namespace sgl
