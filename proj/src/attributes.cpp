#include "sml/attributes.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sml/errors.hpp"

namespace sml {

void AttributeTable::insert(const std::string& name, std::vector<double> vec) {
    if (d_a_ == 0) d_a_ = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != d_a_)
        throw ContractError("attribute vector for '" + name + "' has length " +
                            std::to_string(vec.size()) + ", expected " + std::to_string(d_a_));
    double norm = 0.0;
    for (double v : vec) {
        if (!std::isfinite(v)) throw ContractError("non-finite attribute value for '" + name + "'");
        norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& v : vec) v = static_cast<double>(static_cast<float>(v / norm));
    entries_[name] = std::move(vec);
}

void AttributeTable::insert_raw(const std::string& name, std::vector<double> vec) {
    if (d_a_ == 0) d_a_ = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != d_a_)
        throw ContractError("attribute vector for '" + name + "' has length " +
                            std::to_string(vec.size()) + ", expected " + std::to_string(d_a_));
    entries_[name] = std::move(vec);
}

const std::vector<double>& AttributeTable::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw UnknownClassError("no attribute vector for class '" + name + "'");
    return it->second;
}

AttributeTable load_embeddings(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open embedding file: " + path);
    std::string line;
    if (!std::getline(f, line)) throw ParseError("empty embedding file: " + path, 1);
    std::istringstream header(line);
    long vocab = 0;
    int d_a = 0;
    if (!(header >> vocab >> d_a) || vocab <= 0 || d_a <= 0)
        throw ParseError("bad embedding header in " + path, 1);

    AttributeTable table(d_a);
    for (long i = 0; i < vocab; ++i) {
        const long line_no = i + 2;
        if (!std::getline(f, line))
            throw ParseError("embedding file ends early in " + path, line_no);
        std::istringstream row(line);
        std::string token;
        if (!(row >> token)) throw ParseError("missing token in " + path, line_no);
        if (table.has(token)) throw ParseError("duplicate token '" + token + "' in " + path, line_no);
        std::vector<double> vec(d_a);
        for (int j = 0; j < d_a; ++j)
            if (!(row >> vec[j]))
                throw ParseError("truncated vector for '" + token + "' in " + path, line_no);
        double extra;
        if (row >> extra) throw ParseError("trailing values for '" + token + "' in " + path, line_no);
        table.insert(token, std::move(vec));
    }
    if (!table.has(kBackgroundToken))
        throw ParseError("embedding file lacks the required '" + std::string(kBackgroundToken) +
                         "' token: " + path);
    return table;
}

void save_embeddings(const AttributeTable& table, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << table.size() << " " << table.d_a() << "\n";
    f.precision(9);
    for (const auto& [token, vec] : table.entries()) {
        f << token;
        for (double v : vec) f << " " << v;
        f << "\n";
    }
    if (!f) throw IoError("write failed: " + path);
}

} // namespace sml
