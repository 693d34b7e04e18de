#pragma once

#include <map>
#include <string>

#include "mo3tr/model.hpp"
#include "mo3tr/training.hpp"

namespace mo3tr {

// Flat key=value configuration with section dots (model.d_z=256). Every key
// is validated against the schema when set; unknown keys are errors. Flags
// override file values simply by being applied later.
class RunConfig {
public:
    RunConfig(); // schema defaults

    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
    // "key=value" form, as accepted on the command line
    void set_pair(const std::string& pair);

    bool has(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    uint64_t get_u64(const std::string& key) const;
    const std::string& get_string(const std::string& key) const;

    // canonical text form, keys sorted; identical configs dump identically
    std::string dump() const;
    void write_file(const std::string& path) const;

    ModelConfig model_config() const;
    TrainingConfig training_config() const;

private:
    enum class Kind { Int, Double, Bool, U64, String };
    struct Entry {
        Kind kind;
        std::string value;
    };
    std::map<std::string, Entry> values_;

    const Entry& entry(const std::string& key) const;
};

} // namespace mo3tr
