"""LLM-agent side of the simulator: profiles, memory, prompts, actions and drivers."""
