#include "timing/diff/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "timing/util/hash.hpp"

namespace timing::diff {

namespace {

constexpr const char* kMagic = "timingckpt v1";

std::string hexfloat(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_hexfloat(const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
        throw std::runtime_error("checkpoint: bad value token '" + text + "'");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& config_json,
                     const std::vector<Parameter>& params) {
    if (config_json.find('\n') != std::string::npos)
        throw std::invalid_argument("checkpoint: config must be a single line");
    std::ostringstream body;
    body << kMagic << '\n';
    body << "config " << config_json << '\n';
    body << "params " << params.size() << '\n';
    for (const auto& p : params) {
        const Shape& s = p.array.shape();
        body << "param " << p.name << ' ' << s.size();
        for (int d : s) body << ' ' << d;
        body << '\n';
        const auto& v = p.array.value();
        for (std::size_t i = 0; i < v.size(); ++i) {
            body << hexfloat(v[i]);
            body << ((i % 8 == 7 || i + 1 == v.size()) ? '\n' : ' ');
        }
    }
    const std::string content = body.str();
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    file << content << "end " << util::hex64(util::fnv1a64(content)) << '\n';
    if (!file) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("checkpoint: cannot open " + path);
    std::ostringstream raw;
    raw << file.rdbuf();
    const std::string content = raw.str();

    const auto end_pos = content.rfind("end ");
    if (end_pos == std::string::npos || (end_pos != 0 && content[end_pos - 1] != '\n'))
        throw std::runtime_error("checkpoint: " + path + " has no integrity line");
    const std::string body = content.substr(0, end_pos);
    std::istringstream tail(content.substr(end_pos));
    std::string word, digest;
    tail >> word >> digest;
    if (digest != util::hex64(util::fnv1a64(body)))
        throw std::runtime_error("checkpoint: " + path + " failed its integrity check");

    std::istringstream in(body);
    std::string line;
    if (!std::getline(in, line) || line != kMagic)
        throw std::runtime_error("checkpoint: " + path + " is not a '" + kMagic + "' file");

    Checkpoint out;
    if (!std::getline(in, line) || line.rfind("config ", 0) != 0)
        throw std::runtime_error("checkpoint: missing config line");
    out.config_json = line.substr(7);

    if (!std::getline(in, line) || line.rfind("params ", 0) != 0)
        throw std::runtime_error("checkpoint: missing params line");
    const std::size_t count = std::stoul(line.substr(7));

    for (std::size_t pi = 0; pi < count; ++pi) {
        std::string tag, name;
        std::size_t rank = 0;
        if (!(in >> tag >> name >> rank) || tag != "param")
            throw std::runtime_error("checkpoint: malformed entry " + std::to_string(pi));
        Shape shape(rank);
        for (auto& d : shape)
            if (!(in >> d)) throw std::runtime_error("checkpoint: truncated shape for " + name);
        const auto n = shape_numel(shape);
        std::vector<double> values(static_cast<std::size_t>(n));
        std::string token;
        for (auto& v : values) {
            if (!(in >> token)) throw std::runtime_error("checkpoint: truncated values for " + name);
            v = parse_hexfloat(token);
        }
        out.entries.emplace_back(name, Array::from_data(std::move(shape), std::move(values)));
    }
    return out;
}

void assign_from_checkpoint(const Checkpoint& ckpt, ParamSet& params) {
    std::unordered_set<std::string> covered;
    for (const auto& [name, array] : ckpt.entries) {
        if (!params.contains(name))
            throw std::runtime_error("checkpoint: entry '" + name +
                                     "' has no matching model parameter");
        Parameter& p = params.at(name);
        if (p.array.shape() != array.shape())
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': file has " +
                                     shape_str(array.shape()) + ", model has " +
                                     shape_str(p.array.shape()));
        p.array.mutable_value() = array.value();
        covered.insert(name);
    }
    for (const auto& p : params.all())
        if (!covered.count(p.name))
            throw std::runtime_error("checkpoint: model parameter '" + p.name +
                                     "' missing from file");
}

}  // namespace timing::diff
