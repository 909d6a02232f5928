#include "edpredict/split.hpp"

#include "edpredict/csv.hpp"
#include "edpredict/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <boost/random/mersenne_twister.hpp>

namespace edpredict {

std::vector<HospitalSize> hospital_sizes(const Cohort &cohort) {
    std::map<std::string, std::size_t> counts;
    for (const auto &record : cohort.records) {
        ++counts[record.hospital_id];
    }
    std::vector<HospitalSize> sizes;
    sizes.reserve(counts.size());
    for (const auto &[id, n] : counts) {
        sizes.push_back({id, n});
    }
    return sizes;
}

SplitAssignment split_hospitals(std::vector<HospitalSize> sizes, double train_target,
                                double tolerance, std::uint64_t rng_seed) {
    std::erase_if(sizes, [](const HospitalSize &h) { return h.patients == 0; });
    if (sizes.size() < 2) {
        throw Error(ErrorCode::SingleHospital,
                    "a hospital-disjoint split needs at least two hospitals");
    }
    if (!(train_target > 0.0 && train_target < 1.0) || !(tolerance >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "train target must be in (0, 1)");
    }

    // Equal (size, id) pairs only arise from duplicate ids; the seeded key
    // keeps even that order reproducible.
    boost::random::mt19937_64 rng(rng_seed);
    std::vector<std::pair<HospitalSize, std::uint64_t>> keyed;
    keyed.reserve(sizes.size());
    for (auto &h : sizes) {
        keyed.emplace_back(std::move(h), rng());
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto &a, const auto &b) {
        if (a.first.patients != b.first.patients) {
            return a.first.patients > b.first.patients;
        }
        if (a.first.hospital_id != b.first.hospital_id) {
            return a.first.hospital_id < b.first.hospital_id;
        }
        return a.second < b.second;
    });

    SplitAssignment out;
    std::size_t train = 0;
    std::size_t test = 0;
    for (std::size_t i = 0; i < keyed.size(); ++i) {
        const auto &h = keyed[i].first;
        out.order.push_back(h.hospital_id);
        bool to_train = false;
        if (i == 0) {
            to_train = true;
        } else if (i == 1) {
            to_train = false;
        } else {
            const double fraction =
                static_cast<double>(train) / static_cast<double>(train + test);
            const double train_deficit = train_target - fraction;
            const double test_deficit = (1.0 - train_target) - (1.0 - fraction);
            to_train = train_deficit >= test_deficit;
        }
        if (to_train) {
            out.train_hospitals.insert(h.hospital_id);
            train += h.patients;
        } else {
            out.test_hospitals.insert(h.hospital_id);
            test += h.patients;
        }
    }
    const std::size_t total = train + test;
    out.train_fraction = static_cast<double>(train) / static_cast<double>(total);
    out.warning = std::abs(out.train_fraction - train_target) > tolerance + 1e-12;
    if (!out.warning) {
        return out;
    }

    // The greedy pass can miss the band even when some assignment of the
    // later hospitals hits it. Keep the two fixed placements and pick the
    // reachable train total closest to the target (subset sum).
    const std::size_t fixed = keyed[0].first.patients;
    std::vector<std::size_t> added_by(total + 1, 0); // 1-based hospital index, 0 = unreached
    std::vector<char> reached(total + 1, 0);
    reached[0] = 1;
    for (std::size_t i = 2; i < keyed.size(); ++i) {
        const std::size_t s = keyed[i].first.patients;
        for (std::size_t v = total; v >= s; --v) {
            if (!reached[v] && reached[v - s]) {
                reached[v] = 1;
                added_by[v] = i + 1;
            }
            if (v == s) {
                break;
            }
        }
    }
    const auto distance = [&](std::size_t v) {
        return std::abs(static_cast<double>(fixed + v) / static_cast<double>(total) - train_target);
    };
    std::size_t best = train - fixed;
    for (std::size_t v = 0; v + fixed <= total; ++v) {
        if (reached[v] && distance(v) < distance(best) - 1e-12) {
            best = v;
        }
    }
    if (best == train - fixed) {
        return out;
    }
    out.train_hospitals = {keyed[0].first.hospital_id};
    out.test_hospitals.clear();
    std::set<std::size_t> chosen;
    for (std::size_t v = best; v > 0; v -= keyed[added_by[v] - 1].first.patients) {
        chosen.insert(added_by[v] - 1);
    }
    for (std::size_t i = 1; i < keyed.size(); ++i) {
        (chosen.contains(i) ? out.train_hospitals : out.test_hospitals)
            .insert(keyed[i].first.hospital_id);
    }
    out.train_fraction = static_cast<double>(fixed + best) / static_cast<double>(total);
    out.warning = std::abs(out.train_fraction - train_target) > tolerance + 1e-12;
    out.rebalanced = true;
    return out;
}

SplitAssignment split_hospitals(const Cohort &cohort, double train_target, double tolerance,
                                std::uint64_t rng_seed) {
    return split_hospitals(hospital_sizes(cohort), train_target, tolerance, rng_seed);
}

void write_split_csv(const SplitAssignment &split, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
    }
    write_split_csv(split, out);
}

void write_split_csv(const SplitAssignment &split, std::ostream &out) {
    csv::write_row(out, {"hospital_id", "assignment"});
    for (const auto &id : split.order) {
        csv::write_row(out, {id, split.is_train(id) ? "train" : "test"});
    }
}

} // namespace edpredict
