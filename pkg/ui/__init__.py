"""用户交互层包。"""
