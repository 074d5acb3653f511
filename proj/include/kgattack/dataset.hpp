#pragma once

#include <filesystem>
#include <string>

#include "kgattack/kg.hpp"

namespace kgattack {

/// Dataset directory layout: one triple per line, fields separated by a
/// single TAB, order subject-relation-object. The description file is
/// optional: entity-label TAB free text.
struct DatasetFormat {
    std::string train_file = "train.txt";
    std::string valid_file = "valid.txt";
    std::string test_file = "test.txt";
    std::string descriptions_file = "descriptions.txt";
};

KnowledgeGraph load_dataset(const std::filesystem::path& dir, const DatasetFormat& format = {});

/// Writes the three split files plus descriptions (when any are non-empty).
void write_dataset(const KnowledgeGraph& kg, const std::filesystem::path& dir,
                   const DatasetFormat& format = {});

}  // namespace kgattack
