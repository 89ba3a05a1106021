#pragma once

#include "synco/chem/element.hpp"
#include "synco/chem/fingerprint.hpp"
#include "synco/chem/mol_graph.hpp"
#include "synco/chem/smiles_parser.hpp"
#include "synco/chem/smiles_writer.hpp"
