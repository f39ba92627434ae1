#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "drnn/tasks.hpp"
#include "drnn/train.hpp"

namespace drnn {

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Shortest decimal string that parses back to the identical double
// (round-trip exact, locale-independent).
std::string format_double(double v);
double parse_double(const std::string& s);

// Self-describing text container for a TaskDataset; loading the saved form
// reproduces the dataset exactly (bit-exact reals).
void save_dataset(const TaskDataset& data, std::ostream& os);
TaskDataset load_dataset(std::istream& is);
void save_dataset_file(const TaskDataset& data, const std::string& path);
TaskDataset load_dataset_file(const std::string& path);

// Model checkpoint: architecture header plus every parameter tensor in the
// fixed collect_views order, decimal, round-trip exact.
void save_checkpoint(const Model& m, std::ostream& os);
Model load_checkpoint(std::istream& is);
void save_checkpoint_file(const Model& m, const std::string& path);
Model load_checkpoint_file(const std::string& path);

} // namespace drnn
