#include "timing/data/split.hpp"

#include <numeric>
#include <stdexcept>

#include "timing/util/rng.hpp"

namespace timing::data {

DatasetSplit split_sessions(const std::vector<Session>& sessions, SplitRatios ratios,
                            std::uint64_t seed) {
    if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0)
        throw std::invalid_argument("split: ratios must be positive");
    const std::size_t total = sessions.size();
    const std::size_t parts =
        static_cast<std::size_t>(ratios.train) + static_cast<std::size_t>(ratios.val) +
        static_cast<std::size_t>(ratios.test);
    if (total < parts)
        throw std::invalid_argument("split: " + std::to_string(total) +
                                    " sessions cannot fill ratio parts " + std::to_string(parts));

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    util::Rng rng(seed);
    rng.shuffle(order);

    const std::size_t n_train = total * static_cast<std::size_t>(ratios.train) / parts;
    const std::size_t n_val = total * static_cast<std::size_t>(ratios.val) / parts;

    DatasetSplit out;
    out.train.reserve(n_train);
    out.val.reserve(n_val);
    out.mutable_test().reserve(total - n_train - n_val);
    for (std::size_t i = 0; i < total; ++i) {
        const Session& s = sessions[order[i]];
        if (i < n_train)
            out.train.push_back(s);
        else if (i < n_train + n_val)
            out.val.push_back(s);
        else
            out.mutable_test().push_back(s);
    }
    return out;
}

}  // namespace timing::data
