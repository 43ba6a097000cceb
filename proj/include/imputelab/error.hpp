#pragma once

#include <stdexcept>
#include <string>

namespace imputelab {

class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// A conditioning event (or a formula denominator) has probability zero.
class ZeroProbabilityEvent : public Error {
   public:
    using Error::Error;
};

// A table that should be a probability distribution is not one.
class MalformedDistribution : public Error {
   public:
    using Error::Error;
};

class UnknownLabel : public Error {
   public:
    using Error::Error;
};

class NotMar : public Error {
   public:
    using Error::Error;
};

// Imputation estimate requested for a cell with no observed and no imputed members.
class EmptyCell : public Error {
   public:
    using Error::Error;
};

// A missing-w record has an x value the imputation scheme cannot handle.
class UncoveredX : public Error {
   public:
    using Error::Error;
};

class DomainError : public Error {
   public:
    using Error::Error;
};

class RankDeficient : public Error {
   public:
    using Error::Error;
};

// An (A, B) typing has no row in a conditional DR table.
class UncoveredType : public Error {
   public:
    using Error::Error;
};

class ConfigError : public Error {
   public:
    using Error::Error;
};

}  // namespace imputelab
