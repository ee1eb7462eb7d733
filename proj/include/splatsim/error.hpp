#pragma once

#include <stdexcept>
#include <string>

namespace splatsim {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file (PLY header, config syntax, schema violations).
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid input carrying invalid values (non-finite, bad counts).
struct DataError : Error {
    using Error::Error;
};

// Physical or numerical parameter outside its admissible range.
struct ParameterError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// det(F) <= 0 or an equivalently collapsed deformation state.
struct DegenerateDeformationError : Error {
    explicit DegenerateDeformationError(const std::string& msg, long particle_index = -1)
        : Error(msg), particle(particle_index) {}
    long particle;
};

// Particle left the region where the interpolation stencil is defined.
struct OutOfDomainError : Error {
    explicit OutOfDomainError(const std::string& msg, long particle_index = -1)
        : Error(msg), particle(particle_index) {}
    long particle;
};

// Non-finite forces or velocities; carries the step and the offending particle.
struct NumericalBlowupError : Error {
    NumericalBlowupError(const std::string& msg, long step_index, long particle_index)
        : Error(msg), step(step_index), particle(particle_index) {}
    long step;
    long particle;
};

// Forward-Euler covariance update left the SPD cone; dt too large.
struct TimestepError : Error {
    using Error::Error;
};

} // namespace splatsim
