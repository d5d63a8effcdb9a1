#pragma once

#include <map>
#include <string>
#include <vector>

namespace sml {

/// Token reserved for the background embedding in attribute files.
inline constexpr const char* kBackgroundToken = "background";

/// Class-name -> attribute vector table. Vectors are L2-normalized at insert
/// time and rounded through 32-bit floats so that the values used everywhere
/// (training, checkpoints, reloads) are bit-identical.
class AttributeTable {
public:
    AttributeTable() = default;
    explicit AttributeTable(int d_a) : d_a_(d_a) {}

    int d_a() const { return d_a_; }
    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    std::size_t size() const { return entries_.size(); }

    /// Normalizes, float-rounds and stores. First insert fixes d_a.
    void insert(const std::string& name, std::vector<double> vec);

    /// Stores as-is (already normalized data coming back from a checkpoint,
    /// where re-normalizing would perturb the float-exact values).
    void insert_raw(const std::string& name, std::vector<double> vec);

    /// Throws UnknownClassError when the token is missing.
    const std::vector<double>& at(const std::string& name) const;
    const std::vector<double>& background() const { return at(kBackgroundToken); }

    const std::map<std::string, std::vector<double>>& entries() const { return entries_; }

private:
    int d_a_ = 0;
    std::map<std::string, std::vector<double>> entries_;
};

/// Text embedding file: header "V d_a", then V lines "token v1 ... v_{d_a}".
/// Vectors are L2-normalized on load; the "background" token must be present.
AttributeTable load_embeddings(const std::string& path);
void save_embeddings(const AttributeTable& table, const std::string& path);

} // namespace sml
