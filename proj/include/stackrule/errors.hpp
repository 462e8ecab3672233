#pragma once

#include <stdexcept>
#include <string>

namespace stackrule {

// Base for all library errors so the CLI can catch one type at its boundary.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// data ----------------------------------------------------------------
struct MissingFileError : Error {
    explicit MissingFileError(const std::string& path)
        : Error("cannot open file: " + path) {}
};

struct NonNumericCellError : Error {
    NonNumericCellError(std::size_t row, const std::string& col, const std::string& cell)
        : Error("non-numeric cell at data row " + std::to_string(row) + ", column '" + col +
                "': '" + cell + "'") {}
};

struct ConstantColumnError : Error {
    explicit ConstantColumnError(const std::string& col)
        : Error("feature column '" + col + "' has a single unique value") {}
};

struct LabelNotBinaryError : Error {
    explicit LabelNotBinaryError(const std::string& detail)
        : Error("label column is not binary: " + detail) {}
};

struct ZeroVarianceError : Error {
    explicit ZeroVarianceError(const std::string& col)
        : Error("column '" + col + "' has zero variance") {}
};

struct TooManyFoldsError : Error {
    TooManyFoldsError(std::size_t d, std::size_t n)
        : Error("fold count " + std::to_string(d) + " invalid for n=" + std::to_string(n)) {}
};

// loss ----------------------------------------------------------------
struct LengthMismatchError : Error {
    LengthMismatchError(std::size_t a, std::size_t b)
        : Error("vector lengths differ: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

struct EmptyInputError : Error {
    EmptyInputError() : Error("empty input") {}
};

struct ZeroReferenceError : Error {
    ZeroReferenceError() : Error("reference risk must be positive") {}
};

// learners ------------------------------------------------------------
struct SingleClassError : Error {
    SingleClassError() : Error("training data contains a single class") {}
};

struct ShapeMismatchError : Error {
    ShapeMismatchError(std::size_t got, std::size_t want)
        : Error("feature count " + std::to_string(got) + " does not match model (" +
                std::to_string(want) + ")") {}
};

struct BadLearnerSpecError : Error {
    explicit BadLearnerSpecError(const std::string& detail) : Error(detail) {}
};

// stacking ------------------------------------------------------------
struct FoldMissingClassError : Error {
    explicit FoldMissingClassError(std::size_t fold)
        : Error("training split of fold " + std::to_string(fold) + " lacks one class") {}
};

struct LearnerFitError : Error {
    LearnerFitError(std::size_t learner_index, const std::string& what)
        : Error("learner " + std::to_string(learner_index) + ": " + what) {}
};

// combiner ------------------------------------------------------------
struct AllZeroAlphaError : Error {
    AllZeroAlphaError()
        : Error("nonnegative least squares returned the zero vector; "
                "no learner improves on the empty model") {}
};

struct LibraryMismatchError : Error {
    explicit LibraryMismatchError(const std::string& detail)
        : Error("rule/model library mismatch: " + detail) {}
};

struct NumericalFailureError : Error {
    explicit NumericalFailureError(const std::string& detail) : Error(detail) {}
};

// optimizer -----------------------------------------------------------
struct BadBoundsError : Error {
    explicit BadBoundsError(const std::string& detail) : Error(detail) {}
};

struct BudgetTooSmallError : Error {
    explicit BudgetTooSmallError(const std::string& detail) : Error(detail) {}
};

// evaluation ----------------------------------------------------------
struct GridTooLargeError : Error {
    explicit GridTooLargeError(const std::string& detail) : Error(detail) {}
};

// cli -----------------------------------------------------------------
struct ConfigParseError : Error {
    explicit ConfigParseError(const std::string& detail) : Error(detail) {}
};

}  // namespace stackrule
