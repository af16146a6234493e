"""数值求解核心：模型、路径模拟、BSDE、遍历估计、控制与收敛实验。"""
