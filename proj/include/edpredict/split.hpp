#pragma once

#include "edpredict/cohort.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace edpredict {

struct SplitAssignment {
    std::set<std::string> train_hospitals;
    std::set<std::string> test_hospitals;
    double train_fraction = 0.0;
    /// Placement order actually used (largest hospital first).
    std::vector<std::string> order;
    /// Set when the final fraction falls outside target +/- tolerance.
    bool warning = false;
    /// The greedy pass missed the band and a subset-sum reassignment of the
    /// later hospitals was used instead.
    bool rebalanced = false;

    bool is_train(const std::string &hospital_id) const {
        return train_hospitals.contains(hospital_id);
    }
};

struct HospitalSize {
    std::string hospital_id;
    std::size_t patients = 0;
};

/// Hospital-disjoint greedy split. Hospitals are placed largest first; the
/// largest goes to training, the second to test, and every later hospital
/// joins whichever set is further below its target share of the patients
/// placed so far (ties go to training). If that lands outside
/// target +/- tolerance, the later hospitals are reassigned to reach the
/// train total closest to the target. Throws SingleHospital.
SplitAssignment split_hospitals(std::vector<HospitalSize> sizes, double train_target = 0.75,
                                double tolerance = 0.05, std::uint64_t rng_seed = 0);

SplitAssignment split_hospitals(const Cohort &cohort, double train_target = 0.75,
                                double tolerance = 0.05, std::uint64_t rng_seed = 0);

std::vector<HospitalSize> hospital_sizes(const Cohort &cohort);

void write_split_csv(const SplitAssignment &split, const std::filesystem::path &path);
void write_split_csv(const SplitAssignment &split, std::ostream &out);

} // namespace edpredict
