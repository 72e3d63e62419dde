#pragma once

#include "irtp/model.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace irtp {

// n x m matrix of integer category responses, stored row-major.
class ResponseMatrix {
public:
    ResponseMatrix() = default;
    ResponseMatrix(std::size_t rows, std::size_t cols, std::vector<int> values,
                   std::vector<std::string> item_names = {});

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    int at(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
    ResponsePattern row(std::size_t i) const {
        return {values_.data() + i * cols_, cols_};
    }
    const std::vector<std::string>& item_names() const { return item_names_; }
    const std::vector<int>& values() const { return values_; }

    // Largest observed category + 1, per column.
    std::vector<int> observed_categories() const;

    // Throws CategoryRangeError naming the first offending row and column.
    void validate(const ItemParams& params) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<int> values_;
    std::vector<std::string> item_names_;
};

// Distinct response patterns with frequency weights. All heavy per-respondent
// computations run over the unique patterns; the order is lexicographic so
// reductions are reproducible.
class PatternTable {
public:
    PatternTable() = default;
    explicit PatternTable(const ResponseMatrix& data);

    std::size_t size() const { return counts_.size(); }
    std::size_t items() const { return cols_; }
    ResponsePattern pattern(std::size_t u) const {
        return {patterns_.data() + u * cols_, cols_};
    }
    double count(std::size_t u) const { return counts_[u]; }
    double total() const { return total_; }

private:
    std::size_t cols_ = 0;
    std::vector<int> patterns_;
    std::vector<double> counts_;
    double total_ = 0.0;
};

}  // namespace irtp
