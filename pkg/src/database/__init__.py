# Sequence state and run-history ledger
