#include "kgattack/dataset.hpp"

#include <fstream>
#include <sstream>

#include "kgattack/log.hpp"

namespace kgattack {

namespace {

// Splits a line on single TABs; no quoting or escaping in this format.
std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

void load_split(KnowledgeGraph& kg, const std::filesystem::path& file, Split split) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open " + file.string());
    std::string line;
    std::size_t line_no = 0;
    std::size_t count = 0;
    std::size_t dupes_before = kg.duplicates_dropped();
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 3)
            throw ParseError(file.string(), line_no,
                             "expected 3 tab-separated fields, got " +
                                 std::to_string(fields.size()));
        kg.add_triple(split, fields[0], fields[1], fields[2]);
        ++count;
    }
    if (count == 0) throw Error(file.string() + ": empty split");
    std::size_t dropped = kg.duplicates_dropped() - dupes_before;
    if (dropped > 0)
        logging::warn(file.string() + ": dropped " + std::to_string(dropped) +
                      " duplicate triple(s)");
}

void load_descriptions(KnowledgeGraph& kg, const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) return;  // optional file
    std::string line;
    std::size_t line_no = 0;
    std::size_t unknown = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw ParseError(file.string(), line_no, "expected label TAB description");
        std::string label = line.substr(0, tab);
        auto id = kg.entity_id(label);
        if (!id) {
            ++unknown;
            continue;
        }
        kg.set_description(*id, line.substr(tab + 1));
    }
    if (unknown > 0)
        logging::warn(file.string() + ": skipped " + std::to_string(unknown) +
                      " description(s) for unknown entities");
}

}  // namespace

KnowledgeGraph load_dataset(const std::filesystem::path& dir, const DatasetFormat& format) {
    if (!std::filesystem::is_directory(dir))
        throw Error("dataset directory not found: " + dir.string());
    KnowledgeGraph kg;
    load_split(kg, dir / format.train_file, Split::Train);
    load_split(kg, dir / format.valid_file, Split::Valid);
    load_split(kg, dir / format.test_file, Split::Test);
    load_descriptions(kg, dir / format.descriptions_file);
    kg.finalize();
    return kg;
}

void write_dataset(const KnowledgeGraph& kg, const std::filesystem::path& dir,
                   const DatasetFormat& format) {
    std::filesystem::create_directories(dir);
    auto write_split = [&](const std::string& name, const std::vector<Triple>& triples) {
        std::ofstream out(dir / name);
        if (!out) throw Error("cannot write " + (dir / name).string());
        for (const Triple& t : triples)
            out << kg.entity_label(t.s) << '\t' << kg.relation_label(t.r) << '\t'
                << kg.entity_label(t.o) << '\n';
    };
    write_split(format.train_file, kg.train());
    write_split(format.valid_file, kg.valid());
    write_split(format.test_file, kg.test());

    bool any_desc = false;
    for (EntityId e = 0; e < kg.entity_count(); ++e)
        if (!kg.entity_description(e).empty()) any_desc = true;
    if (any_desc) {
        std::ofstream out(dir / format.descriptions_file);
        for (EntityId e = 0; e < kg.entity_count(); ++e)
            if (!kg.entity_description(e).empty())
                out << kg.entity_label(e) << '\t' << kg.entity_description(e) << '\n';
    }
}

}  // namespace kgattack
