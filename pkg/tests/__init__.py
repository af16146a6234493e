"""
测试包
包含项目所有测试文件
"""
