#pragma once

#define BULKDIFF_VERSION "0.1.0"
