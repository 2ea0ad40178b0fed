/* Starts and exits; measures runtime start-up only. */
int main(void) { return 0; }
