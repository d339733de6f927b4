#include <cstdio>
int main(){ puts("acceptance: not implemented yet"); return 1; }
