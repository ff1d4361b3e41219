#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace evlab {

// key=value text config ('#' comments, blank lines ignored). Keys are
// written back in sorted order so serialization is deterministic.
class KvConfig {
public:
    KvConfig() = default;

    static KvConfig parse_file(const std::string& path);
    static KvConfig parse_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_str(const std::string& key, const std::string& def) const;
    std::string require_str(const std::string& key) const;
    double get_double(const std::string& key, double def) const;
    std::int64_t get_int(const std::string& key, std::int64_t def) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
    bool get_bool(const std::string& key, bool def) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set_double(const std::string& key, double value);
    void set_int(const std::string& key, std::int64_t value);
    void set_u64(const std::string& key, std::uint64_t value);
    void set_bool(const std::string& key, bool value);

    std::string to_string() const;
    void write_file(const std::string& path) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

} // namespace evlab
