#include "irtp/responses.hpp"

#include "irtp/errors.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

namespace irtp {

ResponseMatrix::ResponseMatrix(std::size_t rows, std::size_t cols, std::vector<int> values,
                               std::vector<std::string> item_names)
    : rows_(rows), cols_(cols), values_(std::move(values)), item_names_(std::move(item_names)) {
    if (values_.size() != rows_ * cols_)
        throw InputError("response matrix size does not match its dimensions");
    if (!item_names_.empty() && item_names_.size() != cols_)
        throw InputError("item name count does not match column count");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (values_[i] < 0) {
            std::ostringstream os;
            os << "negative category at row " << i / cols_ + 1 << ", column " << i % cols_ + 1;
            throw CategoryRangeError(os.str());
        }
    }
}

std::vector<int> ResponseMatrix::observed_categories() const {
    std::vector<int> out(cols_, 0);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) out[j] = std::max(out[j], at(i, j) + 1);
    return out;
}

void ResponseMatrix::validate(const ItemParams& params) const {
    if (params.size() != cols_) {
        std::ostringstream os;
        os << "data have " << cols_ << " columns but the model has " << params.size() << " items";
        throw InputError(os.str());
    }
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            const int y = at(i, j);
            if (y >= params.categories(j)) {
                std::ostringstream os;
                os << "row " << i + 1 << ", column " << j + 1;
                if (!item_names_.empty()) os << " (" << item_names_[j] << ")";
                os << ": category " << y << " outside [0, " << params.categories(j) - 1 << "]";
                throw CategoryRangeError(os.str());
            }
        }
    }
}

PatternTable::PatternTable(const ResponseMatrix& data) : cols_(data.cols()) {
    std::map<std::vector<int>, double> tally;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const auto r = data.row(i);
        tally[std::vector<int>(r.begin(), r.end())] += 1.0;
    }
    patterns_.reserve(tally.size() * cols_);
    counts_.reserve(tally.size());
    for (const auto& [p, c] : tally) {
        patterns_.insert(patterns_.end(), p.begin(), p.end());
        counts_.push_back(c);
    }
    total_ = static_cast<double>(data.rows());
}

}  // namespace irtp
