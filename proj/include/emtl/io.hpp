#pragma once

#include <iosfwd>
#include <string>
#include <variant>

#include "emtl/bench.hpp"
#include "emtl/dataset.hpp"
#include "emtl/lgmm.hpp"
#include "emtl/lvq.hpp"
#include "emtl/transfer.hpp"

namespace emtl {

// Dataset CSV: header x_1,...,x_d,label; one point per line; 1-based labels.
Dataset parse_dataset_csv(std::istream& in, const std::string& source_name = "<stream>");
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const Dataset& data, std::ostream& out);
void write_dataset_csv(const Dataset& data, const std::string& path);

// Report CSV: n, then err_mean_<m>, err_std_<m>, time_mean_<m>, time_std_<m>
// for every method m. Values carry 17 significant digits.
void write_report_csv(const ExperimentReport& report, std::ostream& out);
void write_report_csv(const ExperimentReport& report, const std::string& path);
ExperimentReport parse_report_csv(std::istream& in, const std::string& source_name = "<stream>");
ExperimentReport read_report_csv(const std::string& path);

// Model documents: JSON objects tagged by "type".
std::string to_document(const LabeledGMM& model);
std::string to_document(const LvqModel& model);
std::string to_document(const TransferMap& map);

using ModelDocument = std::variant<LabeledGMM, LvqModel, TransferMap>;

ModelDocument parse_document(const std::string& text);
ModelDocument load_document(const std::string& path);
void save_document(const std::string& text, const std::string& path);

LabeledGMM lgmm_from_document(const std::string& text);
LvqModel lvq_from_document(const std::string& text);
TransferMap transfer_map_from_document(const std::string& text);

}  // namespace emtl
