#pragma once

#include "opclass/adasyn.hpp"
#include "opclass/classifier.hpp"
#include "opclass/config.hpp"
#include "opclass/dataset.hpp"
#include "opclass/disasm.hpp"
#include "opclass/errors.hpp"
#include "opclass/evaluate.hpp"
#include "opclass/extract.hpp"
#include "opclass/forest.hpp"
#include "opclass/format.hpp"
#include "opclass/io.hpp"
#include "opclass/neural.hpp"
#include "opclass/reduce.hpp"
#include "opclass/rng.hpp"
#include "opclass/runner.hpp"
