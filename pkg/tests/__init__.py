# Tests for arbcost-pricing package
