#pragma once

#include "nsca/bank.hpp"
#include "nsca/csv.hpp"
#include "nsca/detectors.hpp"
#include "nsca/error.hpp"
#include "nsca/linalg.hpp"
#include "nsca/matrix.hpp"
#include "nsca/partition.hpp"
#include "nsca/random.hpp"
#include "nsca/record.hpp"
#include "nsca/separation.hpp"
#include "nsca/syntheval.hpp"
