# Utility modules for the CHR confluence checker
