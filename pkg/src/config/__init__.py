"""Configuration files: lark grammar, AST and semantic analysis into typed configs."""
