# Core modules for the CHR confluence checker
